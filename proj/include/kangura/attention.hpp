#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "kangura/error.hpp"
#include "kangura/matrix.hpp"
#include "kangura/rng.hpp"

namespace kangura {

// Unified representation attention: bilinear point-to-point scores between
// the raw features (queries) and a KAN branch output (keys), one projection
// pair per branch.
struct UraBlock {
    Matrix theta_o;  // d_att x C, query map on X for the sharp branch
    Matrix theta_s;  // d_att x C, key map on KAN_s
    Matrix phi_o;    // d_att x C, query map on X for the gentle branch
    Matrix phi_g;    // d_att x C, key map on KAN_g
    int d_att = 0;

    UraBlock() = default;

    UraBlock(int channels, int attention_dim, SeededRng& rng) : d_att(attention_dim) {
        if (channels < 1 || attention_dim < 1)
            throw DomainError("UraBlock: dimensions must be positive");
        const double bound = 1.0 / std::sqrt(static_cast<double>(channels));
        auto init = [&] {
            Matrix m(attention_dim, channels);
            for (int i = 0; i < attention_dim; ++i)
                for (int j = 0; j < channels; ++j) m(i, j) = rng.uniform(-bound, bound);
            return m;
        };
        theta_o = init();
        theta_s = init();
        phi_o = init();
        phi_g = init();
    }
};

// Affine classification head over pooled features.
struct ClassifierHead {
    Matrix weights;            // num_classes x pooled_dim
    std::vector<double> bias;  // num_classes

    ClassifierHead() = default;
    ClassifierHead(int pooled_dim, int num_classes)
        : weights(num_classes, pooled_dim), bias(num_classes, 0.0) {
        if (pooled_dim < 1 || num_classes < 1)
            throw DomainError("ClassifierHead: dimensions must be positive");
    }
};

namespace detail {

inline void softmax_rows_inplace(Matrix& m) {
    for (int i = 0; i < m.rows(); ++i) {
        auto row = m.row(i);
        double mx = row[0];
        for (double v : row) mx = std::max(mx, v);
        double sum = 0.0;
        for (double& v : row) {
            v = std::exp(v - mx);
            sum += v;
        }
        const double inv = 1.0 / sum;
        for (double& v : row) v *= inv;
    }
}

}  // namespace detail

// Attention weights W = softmax( (X Q^T)(K P^T)^T / sqrt(d_att) ) row-wise.
// With raw = true the unnormalized bilinear score matrix is returned
// instead (no scaling, no softmax).
inline Matrix ura_weights(const Matrix& q_proj, const Matrix& k_proj, const Matrix& x,
                          const Matrix& k, bool raw = false) {
    if (x.rows() != k.rows()) throw DomainError("ura_weights: point counts disagree");
    if (q_proj.cols() != x.cols() || k_proj.cols() != k.cols() || q_proj.rows() != k_proj.rows())
        throw DomainError("ura_weights: projection shapes disagree");
    const Matrix q = matmul_a_bt(x, q_proj);   // N x d
    const Matrix kp = matmul_a_bt(k, k_proj);  // N x d
    Matrix scores = matmul_a_bt(q, kp);        // N x N
    if (raw) return scores;
    scores *= 1.0 / std::sqrt(static_cast<double>(q_proj.rows()));
    detail::softmax_rows_inplace(scores);
    return scores;
}

// Residual refinement Y = X + W * K.
inline Matrix ura_refine(const Matrix& x, const Matrix& w, const Matrix& k) {
    if (w.rows() != x.rows() || w.cols() != k.rows() || x.cols() != k.cols())
        throw DomainError("ura_refine: shape mismatch");
    Matrix y = matmul(w, k);
    y += x;
    return y;
}

// Channel concatenation [Y_s | Y_g].
inline Matrix fuse(const Matrix& y_s, const Matrix& y_g) {
    if (!y_s.same_shape(y_g)) throw DomainError("fuse: shape mismatch");
    const int n = y_s.rows(), c = y_s.cols();
    Matrix z(n, 2 * c);
    for (int i = 0; i < n; ++i) {
        for (int k = 0; k < c; ++k) z(i, k) = y_s(i, k);
        for (int k = 0; k < c; ++k) z(i, c + k) = y_g(i, k);
    }
    return z;
}

// Column-wise max concatenated with column-wise mean; invariant to row
// order. argmax_rows, when given, records the max row per column (lowest
// index on ties) for the backward pass.
inline std::vector<double> global_pool(const Matrix& z, std::vector<int>* argmax_rows = nullptr) {
    const int n = z.rows(), c = z.cols();
    if (n < 1) throw DomainError("global_pool: empty input");
    std::vector<double> out(2 * c);
    if (argmax_rows) argmax_rows->assign(c, 0);
    for (int k = 0; k < c; ++k) {
        double mx = z(0, k);
        int arg = 0;
        double mean = z(0, k);
        for (int i = 1; i < n; ++i) {
            const double v = z(i, k);
            if (v > mx) {
                mx = v;
                arg = i;
            }
            mean += v;
        }
        out[k] = mx;
        out[c + k] = mean / n;
        if (argmax_rows) (*argmax_rows)[k] = arg;
    }
    return out;
}

inline std::vector<double> classify(const ClassifierHead& head, std::span<const double> pooled) {
    if (static_cast<int>(pooled.size()) != head.weights.cols())
        throw DomainError("classify: pooled feature length mismatch");
    std::vector<double> logits(head.bias);
    for (int r = 0; r < head.weights.rows(); ++r) {
        const double* wr = head.weights.data() + static_cast<std::size_t>(r) * head.weights.cols();
        double s = 0.0;
        for (std::size_t c = 0; c < pooled.size(); ++c) s += wr[c] * pooled[c];
        logits[r] += s;
    }
    return logits;
}

// -- forward/backward over the whole refine-fuse-pool-classify segment -----

struct AttentionForward {
    Matrix q_s, kp_s, w_s;  // sharp branch: queries, projected keys, weights
    Matrix q_g, kp_g, w_g;  // gentle branch
    Matrix y_s, y_g;        // refined features
    Matrix fused;           // [Y_s | Y_g]
    std::vector<double> pooled;
    std::vector<int> argmax_rows;
    std::vector<double> logits;
};

inline AttentionForward attention_head_forward(const UraBlock& ura, const ClassifierHead& head,
                                               const Matrix& x, const Matrix& kan_s,
                                               const Matrix& kan_g, bool raw = false) {
    AttentionForward f;
    const double scale = raw ? 1.0 : 1.0 / std::sqrt(static_cast<double>(ura.d_att));
    f.q_s = matmul_a_bt(x, ura.theta_o);
    f.kp_s = matmul_a_bt(kan_s, ura.theta_s);
    f.w_s = matmul_a_bt(f.q_s, f.kp_s);
    f.q_g = matmul_a_bt(x, ura.phi_o);
    f.kp_g = matmul_a_bt(kan_g, ura.phi_g);
    f.w_g = matmul_a_bt(f.q_g, f.kp_g);
    if (!raw) {
        f.w_s *= scale;
        f.w_g *= scale;
        detail::softmax_rows_inplace(f.w_s);
        detail::softmax_rows_inplace(f.w_g);
    }
    f.y_s = ura_refine(x, f.w_s, kan_s);
    f.y_g = ura_refine(x, f.w_g, kan_g);
    f.fused = fuse(f.y_s, f.y_g);
    f.pooled = global_pool(f.fused, &f.argmax_rows);
    f.logits = classify(head, f.pooled);
    return f;
}

struct UraGrads {
    Matrix theta_o, theta_s, phi_o, phi_g;
};

struct HeadGrads {
    Matrix weights;
    std::vector<double> bias;
};

struct AttentionBackward {
    UraGrads ura;
    HeadGrads head;
    Matrix grad_kan_s;  // gradient into the sharp KAN output
    Matrix grad_kan_g;  // gradient into the gentle KAN output
    Matrix grad_x;      // gradient into the raw features
};

namespace detail {

// d(softmax(s)) applied along rows: ds = w .* (dw - rowdot(dw, w)).
inline Matrix softmax_rows_backward(const Matrix& w, const Matrix& dw) {
    Matrix ds(w.rows(), w.cols());
    for (int i = 0; i < w.rows(); ++i) {
        const auto wr = w.row(i);
        const auto dwr = dw.row(i);
        double dot = 0.0;
        for (int j = 0; j < w.cols(); ++j) dot += wr[j] * dwr[j];
        auto dsr = ds.row(i);
        for (int j = 0; j < w.cols(); ++j) dsr[j] = wr[j] * (dwr[j] - dot);
    }
    return ds;
}

}  // namespace detail

inline AttentionBackward attention_head_backward(const UraBlock& ura, const ClassifierHead& head,
                                                 const Matrix& x, const Matrix& kan_s,
                                                 const Matrix& kan_g, const AttentionForward& f,
                                                 std::span<const double> dlogits,
                                                 bool raw = false) {
    const int n = x.rows(), c = x.cols();
    const int pooled_dim = static_cast<int>(f.pooled.size());
    const int fused_cols = pooled_dim / 2;
    AttentionBackward b;

    // classifier head
    b.head.weights = Matrix(head.weights.rows(), head.weights.cols());
    b.head.bias.assign(head.bias.size(), 0.0);
    std::vector<double> dpooled(pooled_dim, 0.0);
    for (int r = 0; r < head.weights.rows(); ++r) {
        const double dl = dlogits[r];
        b.head.bias[r] = dl;
        for (int k = 0; k < pooled_dim; ++k) {
            b.head.weights(r, k) = dl * f.pooled[k];
            dpooled[k] += dl * head.weights(r, k);
        }
    }

    // pooling: max routes to the recorded argmax row, mean spreads evenly
    Matrix dz(n, fused_cols);
    for (int k = 0; k < fused_cols; ++k) {
        dz(f.argmax_rows[k], k) += dpooled[k];
        const double per_row = dpooled[fused_cols + k] / n;
        for (int i = 0; i < n; ++i) dz(i, k) += per_row;
    }

    // unfuse
    Matrix dy_s(n, c), dy_g(n, c);
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < c; ++k) {
            dy_s(i, k) = dz(i, k);
            dy_g(i, k) = dz(i, c + k);
        }

    b.grad_x = dy_s;
    b.grad_x += dy_g;

    const double scale = raw ? 1.0 : 1.0 / std::sqrt(static_cast<double>(ura.d_att));
    auto branch = [&](const Matrix& q_proj, const Matrix& k_proj, const Matrix& kan,
                      const Matrix& q, const Matrix& kp, const Matrix& w, const Matrix& dy,
                      Matrix& dq_proj, Matrix& dk_proj, Matrix& dkan) {
        // Y = X + W * K
        dkan = matmul_at_b(w, dy);
        const Matrix dw = matmul_a_bt(dy, kan);
        const Matrix ds = raw ? dw : detail::softmax_rows_backward(w, dw);
        Matrix dq = matmul(ds, kp);
        dq *= scale;
        Matrix dkp = matmul_at_b(ds, q);
        dkp *= scale;
        dq_proj = matmul_at_b(dq, x);
        dk_proj = matmul_at_b(dkp, kan);
        b.grad_x += matmul(dq, q_proj);
        dkan += matmul(dkp, k_proj);
    };

    branch(ura.theta_o, ura.theta_s, kan_s, f.q_s, f.kp_s, f.w_s, dy_s, b.ura.theta_o,
           b.ura.theta_s, b.grad_kan_s);
    branch(ura.phi_o, ura.phi_g, kan_g, f.q_g, f.kp_g, f.w_g, dy_g, b.ura.phi_o, b.ura.phi_g,
           b.grad_kan_g);
    return b;
}

}  // namespace kangura
