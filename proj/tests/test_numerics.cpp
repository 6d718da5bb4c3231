#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "kangura/eigen.hpp"
#include "kangura/matrix.hpp"
#include "kangura/rng.hpp"

using namespace kangura;

namespace {

Matrix random_symmetric(int n, SeededRng& rng) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
            const double v = rng.uniform(-1.0, 1.0);
            m(i, j) = v;
            m(j, i) = v;
        }
    return m;
}

double reconstruction_error(const Matrix& m, const SymEigResult& e) {
    const int n = m.rows();
    Matrix ulambda = e.eigenvectors;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) ulambda(i, j) *= e.eigenvalues[j];
    const Matrix rec = matmul_a_bt(ulambda, e.eigenvectors);
    return frobenius_norm(rec - m) / std::max(frobenius_norm(m), 1e-300);
}

double orthonormality_error(const SymEigResult& e) {
    const Matrix gram = matmul_at_b(e.eigenvectors, e.eigenvectors);
    return frobenius_norm(gram - Matrix::identity(gram.rows()));
}

}  // namespace

TEST_CASE("matrix constructors enforce invariants") {
    CHECK_THROWS_AS(Matrix(2, 2, {1.0, 2.0, 3.0}), DomainError);
    CHECK_THROWS_AS(Matrix(1, 2, {1.0, std::nan("")}), DomainError);
    CHECK_THROWS_AS(Matrix(1, 1, {INFINITY}), DomainError);
    const Matrix m(2, 3);
    CHECK(m.rows() == 2);
    CHECK(m.cols() == 3);
    CHECK(max_abs(m) == 0.0);
}

TEST_CASE("matrix products agree with hand results") {
    const Matrix a(2, 3, {1, 2, 3, 4, 5, 6});
    const Matrix b(3, 2, {7, 8, 9, 10, 11, 12});
    const Matrix c = matmul(a, b);
    CHECK(c(0, 0) == 58.0);
    CHECK(c(0, 1) == 64.0);
    CHECK(c(1, 0) == 139.0);
    CHECK(c(1, 1) == 154.0);
    const Matrix ct = matmul_a_bt(a, transpose(b));
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) CHECK(ct(i, j) == c(i, j));
    const Matrix g = matmul_at_b(a, a);
    const Matrix g2 = matmul(transpose(a), a);
    CHECK(frobenius_norm(g - g2) == 0.0);
    CHECK_THROWS_AS(matmul(a, a), DomainError);
}

TEST_CASE("sym_eig identity") {
    const auto e = sym_eig(Matrix::identity(3));
    for (double v : e.eigenvalues) CHECK(v == Catch::Approx(1.0).margin(1e-14));
    CHECK(frobenius_norm(e.eigenvectors - Matrix::identity(3)) < 1e-12);
}

TEST_CASE("sym_eig diagonal matrix sorts ascending") {
    Matrix d(3, 3);
    d(0, 0) = 5.0;
    d(1, 1) = 2.0;
    d(2, 2) = 9.0;
    const auto e = sym_eig(d);
    CHECK(e.eigenvalues[0] == Catch::Approx(2.0).margin(1e-12));
    CHECK(e.eigenvalues[1] == Catch::Approx(5.0).margin(1e-12));
    CHECK(e.eigenvalues[2] == Catch::Approx(9.0).margin(1e-12));
    // eigenvectors are signed unit vectors: e1, e0, e2
    CHECK(e.eigenvectors(1, 0) == Catch::Approx(1.0).margin(1e-12));
    CHECK(e.eigenvectors(0, 1) == Catch::Approx(1.0).margin(1e-12));
    CHECK(e.eigenvectors(2, 2) == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("sym_eig path-graph fixture") {
    // 3-node path Laplacian; characteristic polynomial factors as
    // lambda*(lambda-1)*(lambda-3), so the spectrum is {0, 1, 3}.
    const Matrix l(3, 3, {1, -1, 0, -1, 2, -1, 0, -1, 1});
    const auto e = sym_eig(l);
    CHECK(e.eigenvalues[0] == Catch::Approx(0.0).margin(1e-9));
    CHECK(e.eigenvalues[1] == Catch::Approx(1.0).margin(1e-9));
    CHECK(e.eigenvalues[2] == Catch::Approx(3.0).margin(1e-9));
}

TEST_CASE("sym_eig rejects bad input") {
    CHECK_THROWS_AS(sym_eig(Matrix(2, 3)), DomainError);
    Matrix asym(2, 2, {1.0, 0.5, -0.5, 1.0});
    CHECK_THROWS_AS(sym_eig(asym), DomainError);
}

TEST_CASE("sym_eig random symmetric properties") {
    for (int n : {2, 3, 5, 8, 16, 32}) {
        SeededRng rng(1000 + static_cast<std::uint64_t>(n));
        const Matrix m = random_symmetric(n, rng);
        const auto e = sym_eig(m);
        CAPTURE(n);
        CHECK(reconstruction_error(m, e) < 1e-10);
        CHECK(orthonormality_error(e) < 1e-10);
        for (int i = 1; i < n; ++i) CHECK(e.eigenvalues[i] >= e.eigenvalues[i - 1]);
    }
}

TEST_CASE("sym_eig is bit-deterministic") {
    SeededRng rng(42);
    const Matrix m = random_symmetric(24, rng);
    const auto a = sym_eig(m);
    const auto b = sym_eig(m);
    REQUIRE(a.eigenvalues.size() == b.eigenvalues.size());
    for (std::size_t i = 0; i < a.eigenvalues.size(); ++i)
        CHECK(a.eigenvalues[i] == b.eigenvalues[i]);
    CHECK(frobenius_norm(a.eigenvectors - b.eigenvectors) == 0.0);
}

TEST_CASE("sym_eig sign convention") {
    SeededRng rng(7);
    const Matrix m = random_symmetric(9, rng);
    const auto e = sym_eig(m);
    for (int k = 0; k < 9; ++k) {
        int imax = 0;
        double best = 0.0;
        for (int i = 0; i < 9; ++i) {
            const double av = std::fabs(e.eigenvectors(i, k));
            if (av > best) {
                best = av;
                imax = i;
            }
        }
        CHECK(e.eigenvectors(imax, k) >= 0.0);
    }
}

TEST_CASE("seeded_uniform determinism and range") {
    SeededRng a(7), b(7);
    const auto va = seeded_uniform(a, 0.0, 1.0, 3);
    const auto vb = seeded_uniform(b, 0.0, 1.0, 3);
    CHECK(va == vb);

    SeededRng c(7);
    const auto vc = seeded_uniform(c, 0.0, 0.5, 1000);
    for (double v : vc) {
        CHECK(v >= 0.0);
        CHECK(v < 0.5);
    }
}

TEST_CASE("different seeds give different streams") {
    SeededRng a(7), b(8);
    const auto va = seeded_uniform(a, 0.0, 1.0, 10);
    const auto vb = seeded_uniform(b, 0.0, 1.0, 10);
    int differing = 0;
    for (int i = 0; i < 10; ++i)
        if (va[i] != vb[i]) ++differing;
    CHECK(differing == 10);
}

TEST_CASE("uniform rejects empty interval") {
    SeededRng rng(1);
    CHECK_THROWS_AS(rng.uniform(1.0, 1.0), DomainError);
    CHECK_THROWS_AS(seeded_uniform(rng, 2.0, 1.0, 4), DomainError);
}

TEST_CASE("uniform_int covers range deterministically") {
    SeededRng a(5), b(5);
    for (int i = 0; i < 200; ++i) {
        const auto x = a.uniform_int(17);
        CHECK(x < 17);
        CHECK(x == b.uniform_int(17));
    }
}
