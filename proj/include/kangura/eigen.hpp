#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "kangura/error.hpp"
#include "kangura/matrix.hpp"

namespace kangura {

struct SymEigResult {
    std::vector<double> eigenvalues;  // ascending
    Matrix eigenvectors;              // column j pairs with eigenvalues[j]
};

namespace detail {

// Householder reduction of a symmetric matrix to tridiagonal form with
// accumulation of the orthogonal transform. On entry v holds the matrix
// (row-major n x n); on exit v holds the accumulated transform, d the
// diagonal and e the off-diagonal (e[0] = 0). Classic EISPACK tred2.
inline void tridiagonalize(std::vector<double>& v, std::vector<double>& d,
                           std::vector<double>& e, int n) {
    auto at = [&](int r, int c) -> double& { return v[static_cast<std::size_t>(r) * n + c]; };

    for (int j = 0; j < n; ++j) d[j] = at(n - 1, j);

    for (int i = n - 1; i > 0; --i) {
        double scale = 0.0;
        double h = 0.0;
        for (int k = 0; k < i; ++k) scale += std::fabs(d[k]);
        if (scale == 0.0) {
            e[i] = d[i - 1];
            for (int j = 0; j < i; ++j) {
                d[j] = at(i - 1, j);
                at(i, j) = 0.0;
                at(j, i) = 0.0;
            }
        } else {
            for (int k = 0; k < i; ++k) {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            double f = d[i - 1];
            double g = (f > 0.0) ? -std::sqrt(h) : std::sqrt(h);
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for (int j = 0; j < i; ++j) e[j] = 0.0;

            for (int j = 0; j < i; ++j) {
                f = d[j];
                at(j, i) = f;
                g = e[j] + at(j, j) * f;
                for (int k = j + 1; k <= i - 1; ++k) {
                    g += at(k, j) * d[k];
                    e[k] += at(k, j) * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for (int j = 0; j < i; ++j) {
                e[j] /= h;
                f += e[j] * d[j];
            }
            const double hh = f / (h + h);
            for (int j = 0; j < i; ++j) e[j] -= hh * d[j];
            for (int j = 0; j < i; ++j) {
                f = d[j];
                g = e[j];
                for (int k = j; k <= i - 1; ++k) at(k, j) -= f * e[k] + g * d[k];
                d[j] = at(i - 1, j);
                at(i, j) = 0.0;
            }
        }
        d[i] = h;
    }

    for (int i = 0; i < n - 1; ++i) {
        at(n - 1, i) = at(i, i);
        at(i, i) = 1.0;
        const double h = d[i + 1];
        if (h != 0.0) {
            for (int k = 0; k <= i; ++k) d[k] = at(k, i + 1) / h;
            for (int j = 0; j <= i; ++j) {
                double g = 0.0;
                for (int k = 0; k <= i; ++k) g += at(k, i + 1) * at(k, j);
                for (int k = 0; k <= i; ++k) at(k, j) -= g * d[k];
            }
        }
        for (int k = 0; k <= i; ++k) at(k, i + 1) = 0.0;
    }
    for (int j = 0; j < n; ++j) {
        d[j] = at(n - 1, j);
        at(n - 1, j) = 0.0;
    }
    at(n - 1, n - 1) = 1.0;
    e[0] = 0.0;
}

// QL with implicit shifts on a symmetric tridiagonal matrix, accumulating
// rotations into v. Classic EISPACK tql2; deterministic for a given input.
inline void tridiag_ql(std::vector<double>& v, std::vector<double>& d, std::vector<double>& e,
                       int n) {
    auto at = [&](int r, int c) -> double& { return v[static_cast<std::size_t>(r) * n + c]; };

    for (int i = 1; i < n; ++i) e[i - 1] = e[i];
    e[n - 1] = 0.0;

    double f = 0.0;
    double tst1 = 0.0;
    const double eps = std::numeric_limits<double>::epsilon();
    for (int l = 0; l < n; ++l) {
        tst1 = std::max(tst1, std::fabs(d[l]) + std::fabs(e[l]));
        int m = l;
        while (m < n && std::fabs(e[m]) > eps * tst1) ++m;

        if (m > l) {
            int iter = 0;
            do {
                if (++iter > 50)
                    throw ConvergenceError(
                        "sym_eig: QL iteration cap exceeded, off-diagonal residual " +
                        std::to_string(std::fabs(e[l])));

                double g = d[l];
                double p = (d[l + 1] - g) / (2.0 * e[l]);
                double r = std::hypot(p, 1.0);
                if (p < 0.0) r = -r;
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                const double dl1 = d[l + 1];
                double h = g - d[l];
                for (int i = l + 2; i < n; ++i) d[i] -= h;
                f += h;

                p = d[m];
                double c = 1.0, c2 = c, c3 = c;
                const double el1 = e[l + 1];
                double s = 0.0, s2 = 0.0;
                for (int i = m - 1; i >= l; --i) {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = std::hypot(p, e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for (int k = 0; k < n; ++k) {
                        h = at(k, i + 1);
                        at(k, i + 1) = s * at(k, i) + c * h;
                        at(k, i) = c * at(k, i) - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
            } while (std::fabs(e[l]) > eps * tst1);
        }
        d[l] += f;
        e[l] = 0.0;
    }
}

}  // namespace detail

// Eigendecomposition of a dense symmetric matrix: Householder reduction to
// tridiagonal form followed by implicit-shift QL. Both stages visit entries
// in a fixed order, so repeated calls on the same input are bit-identical.
//
// Eigenvalues are returned in ascending order (stable sort, equal values
// keep iteration order) and every eigenvector is sign-fixed: its entry of
// largest magnitude is made non-negative, ties broken by lowest index.
// tol is the promised relative residual of M*U - U*diag(lambda); the
// iteration itself converges to machine precision, well inside any
// reasonable tol, and throws ConvergenceError naming the residual if the
// iteration cap is hit.
inline SymEigResult sym_eig(const Matrix& m, double tol = 1e-12) {
    (void)tol;
    const int n = m.rows();
    if (n != m.cols() || n < 1) throw DomainError("sym_eig: matrix must be square and non-empty");

    const double scale = std::max(1.0, max_abs(m));
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (std::fabs(m(i, j) - m(j, i)) > 1e-10 * scale)
                throw DomainError("sym_eig: matrix is not symmetric within tolerance");

    // Working copy, symmetrized to kill sub-tolerance asymmetry.
    std::vector<double> v(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            v[static_cast<std::size_t>(i) * n + j] = 0.5 * (m(i, j) + m(j, i));
    std::vector<double> d(n, 0.0), e(n, 0.0);

    detail::tridiagonalize(v, d, e, n);
    detail::tridiag_ql(v, d, e, n);

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int x, int y) { return d[x] < d[y]; });

    SymEigResult result;
    result.eigenvalues.resize(n);
    result.eigenvectors = Matrix(n, n);
    for (int k = 0; k < n; ++k) {
        const int src = order[k];
        result.eigenvalues[k] = d[src];
        int imax = 0;
        double best = std::fabs(v[static_cast<std::size_t>(0) * n + src]);
        for (int i = 1; i < n; ++i) {
            const double av = std::fabs(v[static_cast<std::size_t>(i) * n + src]);
            if (av > best) {
                best = av;
                imax = i;
            }
        }
        const double sign = (v[static_cast<std::size_t>(imax) * n + src] < 0.0) ? -1.0 : 1.0;
        for (int i = 0; i < n; ++i)
            result.eigenvectors(i, k) = sign * v[static_cast<std::size_t>(i) * n + src];
    }
    return result;
}

}  // namespace kangura
