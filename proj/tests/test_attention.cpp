#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "kangura/attention.hpp"
#include "kangura/loss.hpp"

using namespace kangura;

namespace {

Matrix random_matrix(int n, int c, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
    SeededRng rng(seed);
    Matrix m(n, c);
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < c; ++k) m(i, k) = rng.uniform(lo, hi);
    return m;
}

// Independent dense oracle: scores via explicit triple loops, softmax per
// row with a straightforward exp/sum.
Matrix oracle_ura_weights(const Matrix& q_proj, const Matrix& k_proj, const Matrix& x,
                          const Matrix& k) {
    const int n = x.rows(), d = q_proj.rows();
    Matrix q(n, d), kp(n, d);
    for (int i = 0; i < n; ++i)
        for (int a = 0; a < d; ++a) {
            double sq = 0.0, sk = 0.0;
            for (int c = 0; c < x.cols(); ++c) {
                sq += x(i, c) * q_proj(a, c);
                sk += k(i, c) * k_proj(a, c);
            }
            q(i, a) = sq;
            kp(i, a) = sk;
        }
    Matrix w(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            double s = 0.0;
            for (int a = 0; a < d; ++a) s += q(i, a) * kp(j, a);
            w(i, j) = s / std::sqrt(static_cast<double>(d));
        }
        double mx = w(i, 0);
        for (int j = 0; j < n; ++j) mx = std::max(mx, w(i, j));
        double sum = 0.0;
        for (int j = 0; j < n; ++j) {
            w(i, j) = std::exp(w(i, j) - mx);
            sum += w(i, j);
        }
        for (int j = 0; j < n; ++j) w(i, j) /= sum;
    }
    return w;
}

}  // namespace

TEST_CASE("constant keys give uniform attention") {
    const Matrix x = random_matrix(5, 3, 1);
    Matrix k(5, 3);
    for (int i = 0; i < 5; ++i)
        for (int c = 0; c < 3; ++c) k(i, c) = 0.8;  // constant rows
    const Matrix q_proj = random_matrix(4, 3, 2);
    const Matrix k_proj = random_matrix(4, 3, 3);
    const Matrix w = ura_weights(q_proj, k_proj, x, k);
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j) CHECK(w(i, j) == Catch::Approx(0.2).margin(1e-12));
}

TEST_CASE("single point attention is [[1]]") {
    // ura_weights itself places no lower bound on N
    Matrix x(1, 3, {0.4, -0.2, 0.9});
    Matrix k(1, 3, {1.0, 0.0, -1.0});
    const Matrix w = ura_weights(random_matrix(2, 3, 4), random_matrix(2, 3, 5), x, k);
    REQUIRE(w.rows() == 1);
    CHECK(w(0, 0) == 1.0);
}

TEST_CASE("3-point attention matches dense bilinear + softmax oracle") {
    const Matrix x = random_matrix(3, 3, 6);
    const Matrix k = random_matrix(3, 3, 7);
    const Matrix q_proj = random_matrix(3, 3, 8);
    const Matrix k_proj = random_matrix(3, 3, 9);
    const Matrix w = ura_weights(q_proj, k_proj, x, k);
    const Matrix expected = oracle_ura_weights(q_proj, k_proj, x, k);
    CHECK(max_abs(w - expected) < 1e-13);
}

TEST_CASE("attention rows sum to one with entries in (0,1]") {
    const Matrix x = random_matrix(12, 3, 10);
    const Matrix k = random_matrix(12, 3, 11);
    const Matrix w = ura_weights(random_matrix(3, 3, 12), random_matrix(3, 3, 13), x, k);
    for (int i = 0; i < 12; ++i) {
        double sum = 0.0;
        for (int j = 0; j < 12; ++j) {
            CHECK(w(i, j) > 0.0);
            CHECK(w(i, j) <= 1.0);
            sum += w(i, j);
        }
        CHECK(std::fabs(sum - 1.0) < 1e-10);
    }
}

TEST_CASE("raw attention skips normalization") {
    const Matrix x = random_matrix(4, 3, 14);
    const Matrix k = random_matrix(4, 3, 15);
    const Matrix q_proj = random_matrix(3, 3, 16);
    const Matrix k_proj = random_matrix(3, 3, 17);
    const Matrix w = ura_weights(q_proj, k_proj, x, k, /*raw=*/true);
    const Matrix q = matmul_a_bt(x, q_proj), kp = matmul_a_bt(k, k_proj);
    CHECK(max_abs(w - matmul_a_bt(q, kp)) == 0.0);
}

TEST_CASE("refine with zero keys is the identity") {
    const Matrix x = random_matrix(6, 3, 18);
    Matrix w(6, 6);
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) w(i, j) = 1.0 / 6.0;
    const Matrix y = ura_refine(x, w, Matrix(6, 3));
    CHECK(max_abs(y - x) == 0.0);
}

TEST_CASE("refine with identity weights adds the keys") {
    const Matrix x = random_matrix(5, 3, 19);
    const Matrix k = random_matrix(5, 3, 20);
    const Matrix y = ura_refine(x, Matrix::identity(5), k);
    CHECK(max_abs(y - (x + k)) < 1e-15);
}

TEST_CASE("refine matches dense multiply oracle") {
    const Matrix x = random_matrix(4, 3, 21);
    const Matrix k = random_matrix(4, 3, 22);
    Matrix w = random_matrix(4, 4, 23, 0.0, 1.0);
    const Matrix y = ura_refine(x, w, k);
    for (int i = 0; i < 4; ++i)
        for (int c = 0; c < 3; ++c) {
            double s = x(i, c);
            for (int j = 0; j < 4; ++j) s += w(i, j) * k(j, c);
            CHECK(y(i, c) == Catch::Approx(s).margin(1e-13));
        }
    CHECK_THROWS_AS(ura_refine(x, Matrix(3, 4), k), DomainError);
}

TEST_CASE("fuse concatenates channels and slicing recovers inputs") {
    Matrix a(2, 1, {1.0, 2.0});
    Matrix b(2, 1, {3.0, 4.0});
    const Matrix z = fuse(a, b);
    REQUIRE(z.cols() == 2);
    CHECK(z(0, 0) == 1.0);
    CHECK(z(0, 1) == 3.0);
    CHECK(z(1, 0) == 2.0);
    CHECK(z(1, 1) == 4.0);

    const Matrix y = random_matrix(5, 3, 24);
    const Matrix zz = fuse(y, y);
    for (int i = 0; i < 5; ++i)
        for (int c = 0; c < 3; ++c) {
            CHECK(zz(i, c) == y(i, c));
            CHECK(zz(i, c + 3) == y(i, c));
        }
    CHECK_THROWS_AS(fuse(a, Matrix(3, 1)), DomainError);
}

TEST_CASE("global pool of a single row duplicates it") {
    Matrix z(1, 4, {1.0, -2.0, 3.0, 0.5});
    const auto pooled = global_pool(z);
    REQUIRE(pooled.size() == 8);
    for (int k = 0; k < 4; ++k) {
        CHECK(pooled[k] == z(0, k));
        CHECK(pooled[4 + k] == z(0, k));
    }
}

TEST_CASE("global pool is permutation invariant") {
    const Matrix z = random_matrix(9, 6, 25);
    Matrix zp(9, 6);
    const int perm[9] = {4, 7, 1, 8, 0, 3, 6, 2, 5};
    for (int i = 0; i < 9; ++i)
        for (int k = 0; k < 6; ++k) zp(i, k) = z(perm[i], k);
    CHECK(global_pool(z) == global_pool(zp));
}

TEST_CASE("global pool matches brute-force column scan") {
    const Matrix z = random_matrix(7, 4, 26);
    const auto pooled = global_pool(z);
    for (int k = 0; k < 4; ++k) {
        double mx = z(0, k), mean = 0.0;
        for (int i = 0; i < 7; ++i) {
            mx = std::max(mx, z(i, k));
            mean += z(i, k);
        }
        CHECK(pooled[k] == mx);
        CHECK(pooled[4 + k] == Catch::Approx(mean / 7.0).margin(1e-15));
    }
}

TEST_CASE("classify with zero weights returns the bias") {
    ClassifierHead head(6, 3);
    head.bias = {0.5, -1.0, 2.0};
    const std::vector<double> pooled(6, 0.7);
    CHECK(classify(head, pooled) == head.bias);
}

TEST_CASE("classify 1x1 passes through plus bias") {
    ClassifierHead head(1, 1);
    head.weights(0, 0) = 1.0;
    head.bias = {0.25};
    const std::vector<double> pooled{2.0};
    CHECK(classify(head, pooled)[0] == 2.25);
}

TEST_CASE("classify matches dot-product oracle") {
    SeededRng rng(27);
    ClassifierHead head(5, 4);
    for (int r = 0; r < 4; ++r) {
        head.bias[r] = rng.uniform(-1.0, 1.0);
        for (int c = 0; c < 5; ++c) head.weights(r, c) = rng.uniform(-1.0, 1.0);
    }
    std::vector<double> pooled(5);
    for (double& v : pooled) v = rng.uniform(-1.0, 1.0);
    const auto logits = classify(head, pooled);
    for (int r = 0; r < 4; ++r) {
        double s = head.bias[r];
        for (int c = 0; c < 5; ++c) s += head.weights(r, c) * pooled[c];
        CHECK(logits[r] == Catch::Approx(s).margin(1e-14));
    }
    CHECK_THROWS_AS(classify(head, std::vector<double>(4, 0.0)), DomainError);
}

TEST_CASE("zero KAN outputs reduce the segment to pooling of [X | X]") {
    SeededRng rng(28);
    UraBlock ura(3, 3, rng);
    ClassifierHead head(12, 2);
    head.bias = {0.1, -0.3};
    const Matrix x = random_matrix(10, 3, 29);
    const Matrix zeros(10, 3);
    const AttentionForward f = attention_head_forward(ura, head, x, zeros, zeros);
    CHECK(max_abs(f.y_s - x) == 0.0);
    CHECK(max_abs(f.y_g - x) == 0.0);
    CHECK(f.pooled == global_pool(fuse(x, x)));
    CHECK(f.logits == head.bias);
}

TEST_CASE("attention segment gradients match central finite differences") {
    SeededRng rng(30);
    const int n = 6, c = 3, d = 3, classes = 2;
    UraBlock ura(c, d, rng);
    ClassifierHead head(4 * c, classes);
    for (int r = 0; r < classes; ++r) {
        head.bias[r] = rng.uniform(-0.5, 0.5);
        for (int k = 0; k < 4 * c; ++k) head.weights(r, k) = rng.uniform(-0.5, 0.5);
    }
    const Matrix x = random_matrix(n, c, 31);
    const Matrix kan_s = random_matrix(n, c, 32);
    const Matrix kan_g = random_matrix(n, c, 33);
    const int label = 1;

    auto loss = [&]() {
        const AttentionForward f = attention_head_forward(ura, head, x, kan_s, kan_g);
        return cross_entropy(f.logits, label);
    };

    const AttentionForward f = attention_head_forward(ura, head, x, kan_s, kan_g);
    const auto dlogits = cross_entropy_gradient(f.logits, label);
    const AttentionBackward b =
        attention_head_backward(ura, head, x, kan_s, kan_g, f, dlogits);

    std::vector<std::pair<double*, const double*>> params;
    auto add = [&](Matrix& p, const Matrix& g) {
        for (std::size_t i = 0; i < p.size(); ++i)
            params.emplace_back(p.data() + i, g.data() + i);
    };
    add(ura.theta_o, b.ura.theta_o);
    add(ura.theta_s, b.ura.theta_s);
    add(ura.phi_o, b.ura.phi_o);
    add(ura.phi_g, b.ura.phi_g);
    add(head.weights, b.head.weights);
    for (std::size_t i = 0; i < head.bias.size(); ++i)
        params.emplace_back(&head.bias[i], &b.head.bias[i]);

    const double h = 1e-5;
    double worst = 0.0;
    for (auto [p, g] : params) {
        const double orig = *p;
        *p = orig + h;
        const double fp = loss();
        *p = orig - h;
        const double fm = loss();
        *p = orig;
        const double numeric = (fp - fm) / (2.0 * h);
        const double rel =
            std::fabs(*g - numeric) / std::max({std::fabs(*g), std::fabs(numeric), 1e-8});
        worst = std::max(worst, rel);
    }
    CHECK(worst < 1e-6);
}

TEST_CASE("attention backward input gradients match finite differences") {
    SeededRng rng(40);
    const int n = 5, c = 3;
    UraBlock ura(c, c, rng);
    ClassifierHead head(4 * c, 2);
    for (int r = 0; r < 2; ++r)
        for (int k = 0; k < 4 * c; ++k) head.weights(r, k) = rng.uniform(-0.5, 0.5);
    Matrix x = random_matrix(n, c, 41);
    Matrix kan_s = random_matrix(n, c, 42);
    Matrix kan_g = random_matrix(n, c, 43);
    const int label = 0;

    auto loss = [&]() {
        return cross_entropy(attention_head_forward(ura, head, x, kan_s, kan_g).logits, label);
    };

    const AttentionForward f = attention_head_forward(ura, head, x, kan_s, kan_g);
    const auto dlogits = cross_entropy_gradient(f.logits, label);
    const AttentionBackward b = attention_head_backward(ura, head, x, kan_s, kan_g, f, dlogits);

    const double h = 1e-5;
    auto check_input = [&](Matrix& input, const Matrix& analytic) {
        double worst = 0.0;
        for (int i = 0; i < n; ++i)
            for (int k = 0; k < c; ++k) {
                const double orig = input(i, k);
                input(i, k) = orig + h;
                const double fp = loss();
                input(i, k) = orig - h;
                const double fm = loss();
                input(i, k) = orig;
                const double numeric = (fp - fm) / (2.0 * h);
                const double rel = std::fabs(analytic(i, k) - numeric) /
                                   std::max({std::fabs(analytic(i, k)), std::fabs(numeric), 1e-8});
                worst = std::max(worst, rel);
            }
        return worst;
    };
    // max pooling is piecewise linear; keep h small relative to the gaps and
    // the argmax stays put, so central differences remain valid
    CHECK(check_input(x, b.grad_x) < 1e-5);
    CHECK(check_input(kan_s, b.grad_kan_s) < 1e-5);
    CHECK(check_input(kan_g, b.grad_kan_g) < 1e-5);
}
