#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "kangura/error.hpp"
#include "kangura/pointcloud.hpp"
#include "kangura/rng.hpp"

namespace kangura {

enum class ShapeFamily { Sphere, Cube, Torus, Cylinder };

inline const char* family_name(ShapeFamily f) {
    switch (f) {
        case ShapeFamily::Sphere: return "sphere";
        case ShapeFamily::Cube: return "cube";
        case ShapeFamily::Torus: return "torus";
        case ShapeFamily::Cylinder: return "cylinder";
    }
    throw DomainError("family_name: invalid family");
}

inline ShapeFamily parse_family(const std::string& name) {
    if (name == "sphere") return ShapeFamily::Sphere;
    if (name == "cube") return ShapeFamily::Cube;
    if (name == "torus") return ShapeFamily::Torus;
    if (name == "cylinder") return ShapeFamily::Cylinder;
    throw DomainError("unknown shape family '" + name + "'");
}

struct ShapeSpec {
    ShapeFamily family = ShapeFamily::Sphere;
    int n_points = 256;
    double noise_sigma = 0.0;
    std::uint64_t seed = 0;

    void validate() const {
        if (n_points < 8) throw DomainError("ShapeSpec: n_points must be >= 8");
        if (noise_sigma < 0.0) throw DomainError("ShapeSpec: noise_sigma must be >= 0");
    }
};

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

// Uniform area-weighted samples on the ideal surface, before noise and
// rotation. Sphere: unit radius. Cube: faces at +-0.5. Torus: major radius
// 1, minor 0.35, rejection-corrected for the surface-area bias. Cylinder:
// radius 0.5, height 2, caps included.
inline Matrix sample_surface(ShapeFamily family, int n, SeededRng& rng) {
    Matrix p(n, 3);
    switch (family) {
        case ShapeFamily::Sphere:
            for (int i = 0; i < n; ++i) {
                double x, y, z, r;
                do {
                    x = rng.normal();
                    y = rng.normal();
                    z = rng.normal();
                    r = std::sqrt(x * x + y * y + z * z);
                } while (r < 1e-12);
                p(i, 0) = x / r;
                p(i, 1) = y / r;
                p(i, 2) = z / r;
            }
            break;
        case ShapeFamily::Cube:
            for (int i = 0; i < n; ++i) {
                const int face = static_cast<int>(rng.uniform_int(6));
                const int axis = face / 2;
                p(i, axis) = (face % 2 == 0) ? 0.5 : -0.5;
                p(i, (axis + 1) % 3) = rng.uniform(-0.5, 0.5);
                p(i, (axis + 2) % 3) = rng.uniform(-0.5, 0.5);
            }
            break;
        case ShapeFamily::Torus: {
            const double major = 1.0, minor = 0.35;
            for (int i = 0; i < n; ++i) {
                const double u = rng.uniform(0.0, kTwoPi);
                double v;
                // surface element is proportional to major + minor*cos(v)
                do {
                    v = rng.uniform(0.0, kTwoPi);
                } while (rng.uniform(0.0, 1.0) >
                         (major + minor * std::cos(v)) / (major + minor));
                const double ring = major + minor * std::cos(v);
                p(i, 0) = ring * std::cos(u);
                p(i, 1) = ring * std::sin(u);
                p(i, 2) = minor * std::sin(v);
            }
            break;
        }
        case ShapeFamily::Cylinder: {
            const double radius = 0.5, half_height = 1.0;
            const double lateral = kTwoPi * radius * 2.0 * half_height;
            const double cap = kTwoPi / 2.0 * radius * radius;  // pi r^2
            const double total = lateral + 2.0 * cap;
            for (int i = 0; i < n; ++i) {
                const double t = rng.uniform(0.0, total);
                const double theta = rng.uniform(0.0, kTwoPi);
                if (t < lateral) {
                    p(i, 0) = radius * std::cos(theta);
                    p(i, 1) = radius * std::sin(theta);
                    p(i, 2) = rng.uniform(-half_height, half_height);
                } else {
                    const double rho = radius * std::sqrt(rng.uniform(0.0, 1.0));
                    p(i, 0) = rho * std::cos(theta);
                    p(i, 1) = rho * std::sin(theta);
                    p(i, 2) = (t < lateral + cap) ? half_height : -half_height;
                }
            }
            break;
        }
    }
    return p;
}

namespace detail {

// Uniform rotation from a random unit quaternion.
inline void apply_random_rotation(Matrix& p, SeededRng& rng) {
    double q[4], norm;
    do {
        norm = 0.0;
        for (double& v : q) {
            v = rng.normal();
            norm += v * v;
        }
        norm = std::sqrt(norm);
    } while (norm < 1e-12);
    for (double& v : q) v /= norm;
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    const double rot[3][3] = {
        {1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)},
        {2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)},
        {2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)}};
    for (int i = 0; i < p.rows(); ++i) {
        const double a = p(i, 0), b = p(i, 1), c = p(i, 2);
        for (int r = 0; r < 3; ++r) p(i, r) = rot[r][0] * a + rot[r][1] * b + rot[r][2] * c;
    }
}

}  // namespace detail

// Ideal surface samples, then Gaussian noise, then a uniformly random
// orientation.
inline PointCloud gen_shape(const ShapeSpec& spec, SeededRng& rng,
                            std::optional<int> label = std::nullopt) {
    spec.validate();
    Matrix p = sample_surface(spec.family, spec.n_points, rng);
    if (spec.noise_sigma > 0.0)
        for (int i = 0; i < p.rows(); ++i)
            for (int k = 0; k < 3; ++k) p(i, k) += rng.normal(0.0, spec.noise_sigma);
    detail::apply_random_rotation(p, rng);
    return PointCloud(std::move(p), label);
}

struct GenSpec {
    std::vector<ShapeFamily> classes;
    int per_class_train = 1;
    int per_class_test = 1;
    std::vector<int> imbalance;  // optional per-class count multipliers
    int n_points = 256;
    double noise_sigma = 0.02;
    std::uint64_t seed = 0;

    void validate() const {
        if (classes.size() < 2) throw DomainError("GenSpec: need at least 2 classes");
        if (per_class_train < 1 || per_class_test < 1)
            throw DomainError("GenSpec: per-class counts must be >= 1");
        if (!imbalance.empty() && imbalance.size() != classes.size())
            throw DomainError("GenSpec: imbalance list must match the class count");
        for (int m : imbalance)
            if (m < 1) throw DomainError("GenSpec: imbalance multipliers must be >= 1");
        if (n_points < 8) throw DomainError("GenSpec: n_points must be >= 8");
        if (noise_sigma < 0.0) throw DomainError("GenSpec: noise_sigma must be >= 0");
    }

    std::vector<std::string> class_names() const {
        std::vector<std::string> names;
        for (std::size_t c = 0; c < classes.size(); ++c) {
            std::string name = family_name(classes[c]);
            for (std::size_t prev = 0; prev < c; ++prev)
                if (classes[prev] == classes[c]) {
                    name += "_" + std::to_string(c);
                    break;
                }
            names.push_back(std::move(name));
        }
        return names;
    }
};

// Deterministic generation with disjoint per-sample seeds,
// sample_seed = hash64(global_seed, class, index); train samples take the
// low indices, test samples continue after them.
inline std::pair<Dataset, Dataset> gen_dataset(const GenSpec& spec) {
    spec.validate();
    Dataset train, test;
    train.class_names = spec.class_names();
    test.class_names = train.class_names;

    for (std::size_t c = 0; c < spec.classes.size(); ++c) {
        const int mult = spec.imbalance.empty() ? 1 : spec.imbalance[c];
        const int n_train = spec.per_class_train * mult;
        const int n_test = spec.per_class_test * mult;
        for (int idx = 0; idx < n_train + n_test; ++idx) {
            ShapeSpec shape;
            shape.family = spec.classes[c];
            shape.n_points = spec.n_points;
            shape.noise_sigma = spec.noise_sigma;
            shape.seed = hash_combine64(hash_combine64(spec.seed, c), idx);
            SeededRng rng(shape.seed);
            PointCloud cloud = gen_shape(shape, rng, static_cast<int>(c));
            (idx < n_train ? train : test).clouds.push_back(std::move(cloud));
        }
    }
    return {std::move(train), std::move(test)};
}

inline std::string serialize_gen_spec(const GenSpec& spec) {
    std::string out;
    out += "classes=";
    for (std::size_t c = 0; c < spec.classes.size(); ++c)
        out += std::string(c ? "," : "") + family_name(spec.classes[c]);
    out += "\nper_class_train=" + std::to_string(spec.per_class_train);
    out += "\nper_class_test=" + std::to_string(spec.per_class_test);
    out += "\nimbalance=";
    for (std::size_t c = 0; c < spec.imbalance.size(); ++c)
        out += std::string(c ? "," : "") + std::to_string(spec.imbalance[c]);
    out += "\nn_points=" + std::to_string(spec.n_points);
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.17g", spec.noise_sigma);
    out += "\nnoise_sigma=" + std::string(buf);
    out += "\nseed=" + std::to_string(spec.seed);
    out += "\n";
    return out;
}

// Writes <out>/train, <out>/test (dataset layout) and <out>/manifest.txt
// recording the generation spec.
inline void write_generated(const GenSpec& spec, const std::filesystem::path& out_dir) {
    auto [train, test] = gen_dataset(spec);
    std::filesystem::create_directories(out_dir);
    write_dataset(train, out_dir / "train");
    write_dataset(test, out_dir / "test");
    std::ofstream manifest(out_dir / "manifest.txt");
    if (!manifest) throw Error("write_generated: cannot open manifest");
    manifest << serialize_gen_spec(spec);
}

}  // namespace kangura
