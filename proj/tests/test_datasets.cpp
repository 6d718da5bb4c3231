#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "kangura/datasets.hpp"

using namespace kangura;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("kangura_ds_" + tag + "_" + std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool dirs_identical(const fs::path& a, const fs::path& b) {
    std::vector<fs::path> fa, fb;
    for (auto& e : fs::recursive_directory_iterator(a))
        if (e.is_regular_file()) fa.push_back(fs::relative(e.path(), a));
    for (auto& e : fs::recursive_directory_iterator(b))
        if (e.is_regular_file()) fb.push_back(fs::relative(e.path(), b));
    std::sort(fa.begin(), fa.end());
    std::sort(fb.begin(), fb.end());
    if (fa != fb) return false;
    for (const auto& rel : fa)
        if (slurp(a / rel) != slurp(b / rel)) return false;
    return true;
}

}  // namespace

TEST_CASE("noise-free sphere points lie on the unit sphere") {
    ShapeSpec spec;
    spec.family = ShapeFamily::Sphere;
    spec.n_points = 200;
    spec.noise_sigma = 0.0;
    SeededRng rng(1);
    const PointCloud c = gen_shape(spec, rng);  // rotation preserves norms
    for (int i = 0; i < c.size(); ++i) {
        double r = 0.0;
        for (int k = 0; k < 3; ++k) r += c.points(i, k) * c.points(i, k);
        CHECK(std::sqrt(r) == Catch::Approx(1.0).margin(1e-9));
    }
}

TEST_CASE("noise-free cube points sit on a face, pre-rotation") {
    SeededRng rng(2);
    const Matrix p = sample_surface(ShapeFamily::Cube, 300, rng);
    for (int i = 0; i < p.rows(); ++i) {
        bool on_face = false;
        for (int k = 0; k < 3; ++k) {
            CHECK(std::fabs(p(i, k)) <= 0.5 + 1e-12);
            if (std::fabs(std::fabs(p(i, k)) - 0.5) < 1e-9) on_face = true;
        }
        CHECK(on_face);
    }
}

TEST_CASE("noise-free torus satisfies its implicit surface equation, pre-rotation") {
    SeededRng rng(3);
    const Matrix p = sample_surface(ShapeFamily::Torus, 300, rng);
    for (int i = 0; i < p.rows(); ++i) {
        const double ring = std::sqrt(p(i, 0) * p(i, 0) + p(i, 1) * p(i, 1));
        const double residual = (ring - 1.0) * (ring - 1.0) + p(i, 2) * p(i, 2);
        CHECK(residual == Catch::Approx(0.35 * 0.35).margin(1e-9));
    }
}

TEST_CASE("noise-free cylinder points lie on the lateral wall or the caps") {
    SeededRng rng(4);
    const Matrix p = sample_surface(ShapeFamily::Cylinder, 300, rng);
    int caps = 0, lateral = 0;
    for (int i = 0; i < p.rows(); ++i) {
        const double rho = std::sqrt(p(i, 0) * p(i, 0) + p(i, 1) * p(i, 1));
        CHECK(std::fabs(p(i, 2)) <= 1.0 + 1e-12);
        if (std::fabs(std::fabs(p(i, 2)) - 1.0) < 1e-9) {
            CHECK(rho <= 0.5 + 1e-9);
            ++caps;
        } else {
            CHECK(rho == Catch::Approx(0.5).margin(1e-9));
            ++lateral;
        }
    }
    CHECK(caps > 0);
    CHECK(lateral > 0);
}

TEST_CASE("family names round-trip and bad names are rejected") {
    for (ShapeFamily f : {ShapeFamily::Sphere, ShapeFamily::Cube, ShapeFamily::Torus,
                          ShapeFamily::Cylinder})
        CHECK(parse_family(family_name(f)) == f);
    CHECK_THROWS_AS(parse_family("pyramid"), DomainError);
}

TEST_CASE("generated dataset counts match the spec") {
    GenSpec spec;
    spec.classes = {ShapeFamily::Sphere, ShapeFamily::Cube, ShapeFamily::Torus,
                    ShapeFamily::Cylinder};
    spec.per_class_train = 200;
    spec.per_class_test = 10;
    spec.n_points = 8;
    spec.noise_sigma = 0.0;
    spec.seed = 11;
    const auto [train, test] = gen_dataset(spec);
    CHECK(train.size() == 800);
    CHECK(test.size() == 40);
    int per_class[4] = {0, 0, 0, 0};
    for (const auto& c : train.clouds) ++per_class[*c.label];
    for (int c = 0; c < 4; ++c) CHECK(per_class[c] == 200);
}

TEST_CASE("imbalance multipliers scale the class counts") {
    GenSpec spec;
    spec.classes = {ShapeFamily::Sphere, ShapeFamily::Cube};
    spec.per_class_train = 100;
    spec.per_class_test = 20;
    spec.imbalance = {3, 7};
    spec.n_points = 8;
    spec.seed = 12;
    const auto [train, test] = gen_dataset(spec);
    int train_counts[2] = {0, 0}, test_counts[2] = {0, 0};
    for (const auto& c : train.clouds) ++train_counts[*c.label];
    for (const auto& c : test.clouds) ++test_counts[*c.label];
    CHECK(train_counts[0] == 300);
    CHECK(train_counts[1] == 700);
    CHECK(test_counts[0] == 60);
    CHECK(test_counts[1] == 140);
}

TEST_CASE("identical GenSpecs produce byte-identical dataset files") {
    GenSpec spec;
    spec.classes = {ShapeFamily::Sphere, ShapeFamily::Torus};
    spec.per_class_train = 3;
    spec.per_class_test = 2;
    spec.n_points = 16;
    spec.noise_sigma = 0.02;
    spec.seed = 13;
    TempDir a("gen_a"), b("gen_b");
    write_generated(spec, a.path);
    write_generated(spec, b.path);
    CHECK(dirs_identical(a.path, b.path));
    CHECK(fs::exists(a.path / "manifest.txt"));
    CHECK(slurp(a.path / "manifest.txt").find("classes=sphere,torus") != std::string::npos);
}

TEST_CASE("generated clouds round-trip through the dataset format") {
    GenSpec spec;
    spec.classes = {ShapeFamily::Cube, ShapeFamily::Cylinder};
    spec.per_class_train = 2;
    spec.per_class_test = 1;
    spec.n_points = 24;
    spec.noise_sigma = 0.01;
    spec.seed = 14;
    TempDir dir("gen_rt");
    write_generated(spec, dir.path);
    const auto [train, test] = gen_dataset(spec);
    const Dataset back = read_dataset(dir.path / "train");
    REQUIRE(back.size() == train.size());
    for (std::size_t i = 0; i < train.size(); ++i)
        for (int r = 0; r < train.clouds[i].size(); ++r)
            for (int k = 0; k < 3; ++k)
                CHECK(back.clouds[i].points(r, k) ==
                      Catch::Approx(train.clouds[i].points(r, k)).margin(1e-12));
}

TEST_CASE("invalid generation specs are rejected") {
    GenSpec spec;
    spec.classes = {ShapeFamily::Sphere};
    CHECK_THROWS_AS(gen_dataset(spec), DomainError);  // < 2 classes
    spec.classes = {ShapeFamily::Sphere, ShapeFamily::Cube};
    spec.imbalance = {2};
    CHECK_THROWS_AS(gen_dataset(spec), DomainError);  // multiplier count mismatch
    spec.imbalance.clear();
    spec.n_points = 4;
    CHECK_THROWS_AS(gen_dataset(spec), DomainError);  // too few points
    ShapeSpec shape;
    shape.n_points = 4;
    SeededRng rng(1);
    CHECK_THROWS_AS(gen_shape(shape, rng), DomainError);
}

TEST_CASE("duplicate families get distinct class names") {
    GenSpec spec;
    spec.classes = {ShapeFamily::Sphere, ShapeFamily::Sphere};
    const auto names = spec.class_names();
    CHECK(names[0] == "sphere");
    CHECK(names[1] == "sphere_1");
}
