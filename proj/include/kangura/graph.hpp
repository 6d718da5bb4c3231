#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "kangura/eigen.hpp"
#include "kangura/error.hpp"
#include "kangura/matrix.hpp"
#include "kangura/pointcloud.hpp"

namespace kangura {

enum class AdjacencyNorm {
    RandomWalk,  // A~ = D^-1 A, row-stochastic (default)
    Symmetric,   // A~ = D^-1/2 A D^-1/2, experimental alternative
};

// Gaussian-kernel affinity graph parameters. sigma and tau are in the same
// units as the (unit-sphere-normalized) coordinates.
struct GraphConfig {
    double sigma = 0.2;
    double tau = 0.4;
    bool self_loops = true;
    AdjacencyNorm norm = AdjacencyNorm::RandomWalk;
};

struct AffinityGraph {
    Matrix adjacency;             // A, symmetric, entries in [0, 1]
    std::vector<double> degree;   // row sums of A
    Matrix norm_adjacency;        // A~; rows sum to 1 under RandomWalk
};

struct SpectralBasis {
    std::vector<double> eigenvalues;  // ascending; eigenvalue 0 present
    Matrix eigenvectors;              // orthonormal columns
    int split_index = 1;              // T: [0,T) gentle band, [T,N) sharp band
};

struct DisentangledSignals {
    Matrix sharp;   // (I - A~) X_s
    Matrix gentle;  // A~ X_g
};

// Thresholded Gaussian kernel adjacency: A_ij = exp(-|xi-xj|^2 / sigma^2)
// when |xi-xj| <= tau, else 0. A point with no off-diagonal neighbor is
// linked to its nearest neighbor with the kernel weight, so every degree is
// positive and D^-1 exists.
inline AffinityGraph build_affinity(const PointCloud& cloud, const GraphConfig& cfg) {
    if (!(cfg.sigma > 0.0) || !(cfg.tau > 0.0))
        throw DomainError("build_affinity: sigma and tau must be positive");
    const int n = cloud.size();
    if (n < 2) throw DomainError("build_affinity: cloud needs at least 2 points");
    const int c = cloud.channels();
    const Matrix& p = cloud.points;

    const double inv_sigma_sq = 1.0 / (cfg.sigma * cfg.sigma);
    const double tau_sq = cfg.tau * cfg.tau;

    AffinityGraph g;
    g.adjacency = Matrix(n, n);
    Matrix dist_sq(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            double d = 0.0;
            for (int k = 0; k < c; ++k) {
                const double diff = p(i, k) - p(j, k);
                d += diff * diff;
            }
            dist_sq(i, j) = d;
            dist_sq(j, i) = d;
            if (d <= tau_sq) {
                const double w = std::exp(-d * inv_sigma_sq);
                g.adjacency(i, j) = w;
                g.adjacency(j, i) = w;
            }
        }
        if (cfg.self_loops) g.adjacency(i, i) = 1.0;
    }

    // Isolated-point repair: nearest neighbor by distance, ties to the
    // lowest index.
    for (int i = 0; i < n; ++i) {
        bool isolated = true;
        for (int j = 0; j < n && isolated; ++j)
            if (j != i && g.adjacency(i, j) > 0.0) isolated = false;
        if (!isolated) continue;
        int nearest = -1;
        double best = 0.0;
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            if (nearest < 0 || dist_sq(i, j) < best) {
                nearest = j;
                best = dist_sq(i, j);
            }
        }
        const double w = std::exp(-best * inv_sigma_sq);
        g.adjacency(i, nearest) = w;
        g.adjacency(nearest, i) = w;
    }

    g.degree.assign(n, 0.0);
    for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (int j = 0; j < n; ++j) s += g.adjacency(i, j);
        g.degree[i] = s;
    }

    g.norm_adjacency = Matrix(n, n);
    if (cfg.norm == AdjacencyNorm::RandomWalk) {
        for (int i = 0; i < n; ++i) {
            const double inv = 1.0 / g.degree[i];
            for (int j = 0; j < n; ++j) g.norm_adjacency(i, j) = g.adjacency(i, j) * inv;
        }
    } else {
        std::vector<double> inv_sqrt(n);
        for (int i = 0; i < n; ++i) inv_sqrt[i] = 1.0 / std::sqrt(g.degree[i]);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                g.norm_adjacency(i, j) = inv_sqrt[i] * g.adjacency(i, j) * inv_sqrt[j];
    }
    return g;
}

inline Matrix laplacian(const AffinityGraph& g) {
    const int n = g.adjacency.rows();
    Matrix l(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) l(i, j) = -g.adjacency(i, j);
        l(i, i) += g.degree[i];
    }
    return l;
}

// Eigendecomposition of L = D - A with the band boundary at index
// T = clamp(round(split_fraction * N), 1, N-1): indices [0, T) form the
// low-frequency (gentle) band, [T, N) the high-frequency (sharp) band.
inline SpectralBasis laplacian_basis(const AffinityGraph& g, double split_fraction) {
    if (!(split_fraction > 0.0) || !(split_fraction < 1.0))
        throw DomainError("laplacian_basis: split_fraction must be in (0, 1)");
    const int n = g.adjacency.rows();
    auto eig = sym_eig(laplacian(g));
    SpectralBasis basis;
    basis.eigenvalues = std::move(eig.eigenvalues);
    basis.eigenvectors = std::move(eig.eigenvectors);
    const int t = static_cast<int>(std::lround(split_fraction * n));
    basis.split_index = std::max(1, std::min(n - 1, t));
    return basis;
}

namespace detail {

// Band-limited reconstruction U[:, lo:hi] * (U[:, lo:hi]^T X) without
// materializing the column slice.
inline Matrix project_band(const Matrix& u, int lo, int hi, const Matrix& x) {
    const int n = u.rows(), c = x.cols(), width = hi - lo;
    Matrix coef(width, c);
    for (int p = 0; p < n; ++p) {
        const double* urow = u.data() + static_cast<std::size_t>(p) * u.cols();
        const double* xrow = x.data() + static_cast<std::size_t>(p) * c;
        for (int t = 0; t < width; ++t) {
            const double uv = urow[lo + t];
            double* crow = coef.data() + static_cast<std::size_t>(t) * c;
            for (int k = 0; k < c; ++k) crow[k] += uv * xrow[k];
        }
    }
    Matrix out(n, c);
    for (int p = 0; p < n; ++p) {
        const double* urow = u.data() + static_cast<std::size_t>(p) * u.cols();
        double* orow = out.data() + static_cast<std::size_t>(p) * c;
        for (int t = 0; t < width; ++t) {
            const double uv = urow[lo + t];
            const double* crow = coef.data() + static_cast<std::size_t>(t) * c;
            for (int k = 0; k < c; ++k) orow[k] += uv * crow[k];
        }
    }
    return out;
}

}  // namespace detail

// Splits a vertex signal into band-limited reconstructions: X_s spans only
// the sharp eigenvectors [T, N), X_g only the gentle ones [0, T), and
// X_s + X_g = X up to the orthonormality of the basis.
inline std::pair<Matrix, Matrix> band_split(const SpectralBasis& basis, const Matrix& x) {
    const int n = basis.eigenvectors.rows();
    if (x.rows() != n) throw DomainError("band_split: signal row count differs from basis");
    const int t = basis.split_index;
    Matrix x_g = detail::project_band(basis.eigenvectors, 0, t, x);
    Matrix x_s = detail::project_band(basis.eigenvectors, t, n, x);
    return {std::move(x_s), std::move(x_g)};
}

// Sharp components pass through the high-pass (I - A~); gentle components
// through the low-pass A~. Under random-walk normalization A~ fixes
// constant signals and (I - A~) annihilates them.
inline DisentangledSignals spectral_filter(const AffinityGraph& g, const Matrix& x_s,
                                           const Matrix& x_g) {
    const int n = g.norm_adjacency.rows();
    if (x_s.rows() != n || x_g.rows() != n || x_s.cols() != x_g.cols())
        throw DomainError("spectral_filter: shape mismatch");
    DisentangledSignals out;
    out.gentle = matmul(g.norm_adjacency, x_g);
    out.sharp = x_s - matmul(g.norm_adjacency, x_s);
    return out;
}

// Inputs to the learnable part of the model; depend only on the cloud's
// coordinates, never on trainable parameters, so they can be computed once
// per cloud and reused across training steps.
struct SpectralFeatures {
    Matrix x;       // original coordinates
    Matrix sharp;   // filtered high-frequency component
    Matrix gentle;  // filtered low-frequency component
};

inline SpectralFeatures disentangle(const PointCloud& cloud, const GraphConfig& cfg,
                                    double split_fraction) {
    const AffinityGraph g = build_affinity(cloud, cfg);
    const SpectralBasis basis = laplacian_basis(g, split_fraction);
    auto [x_s, x_g] = band_split(basis, cloud.points);
    DisentangledSignals d = spectral_filter(g, x_s, x_g);
    ensure_finite(d.sharp, "spectral_filter");
    ensure_finite(d.gentle, "spectral_filter");
    return SpectralFeatures{cloud.points, std::move(d.sharp), std::move(d.gentle)};
}

}  // namespace kangura
