#pragma once

#include <array>
#include <cmath>
#include <span>
#include <vector>

#include "kangura/error.hpp"

namespace kangura {

inline double silu(double x) { return x / (1.0 + std::exp(-x)); }

inline double silu_derivative(double x) {
    const double s = 1.0 / (1.0 + std::exp(-x));
    return s * (1.0 + x * (1.0 - s));
}

// Knot vector for a B-spline basis of the given degree. A grid with G
// uniform intervals on [-extent, +extent] is extended by `degree` intervals
// on each side, giving G + 2*degree + 1 knots and G + degree basis
// functions. The basis has partition of unity on [-extent, +extent].
struct SplineGrid {
    std::vector<double> knots;
    int degree = 3;

    SplineGrid() = default;
    SplineGrid(std::vector<double> k, int deg) : knots(std::move(k)), degree(deg) { validate(); }

    static SplineGrid uniform(double extent, int intervals, int degree) {
        if (!(extent > 0.0) || intervals < 1 || degree < 0)
            throw DomainError("SplineGrid: extent > 0, intervals >= 1, degree >= 0 required");
        const double h = 2.0 * extent / intervals;
        std::vector<double> knots(intervals + 2 * degree + 1);
        for (int j = 0; j < static_cast<int>(knots.size()); ++j)
            knots[j] = -extent + (j - degree) * h;
        return SplineGrid(std::move(knots), degree);
    }

    int basis_count() const { return static_cast<int>(knots.size()) - 1 - degree; }
    double domain_lo() const { return knots[degree]; }
    double domain_hi() const { return knots[knots.size() - 1 - degree]; }

    void validate() const {
        if (degree < 0 || degree > 7) throw DomainError("SplineGrid: degree must be in [0, 7]");
        if (static_cast<int>(knots.size()) < degree + 2)
            throw DomainError("SplineGrid: too few knots for degree");
        for (std::size_t j = 1; j < knots.size(); ++j)
            if (!(knots[j] > knots[j - 1]))
                throw DomainError("SplineGrid: knot vector must be strictly increasing");
    }
};

// The degree+1 basis functions that are nonzero at a point, starting at
// basis index `offset`. Inputs beyond the grid extent are clamped to it
// first; `clamped` records that, because a clamped point contributes zero
// basis derivative.
struct LocalBasis {
    int offset = 0;
    int count = 0;
    bool clamped = false;
    std::array<double, 8> values{};
};

namespace detail {

inline int find_span(double x, const SplineGrid& g) {
    const int k = g.degree;
    const int m = static_cast<int>(g.knots.size()) - 1;
    int lo = k, hi = m - k - 1;
    // binary search for the span s with knots[s] <= x < knots[s+1]
    while (lo < hi) {
        const int mid = (lo + hi + 1) / 2;
        if (g.knots[mid] <= x)
            lo = mid;
        else
            hi = mid - 1;
    }
    return lo;
}

}  // namespace detail

// Cox-de Boor evaluation of the nonzero basis functions at x.
inline LocalBasis local_bspline(double x, const SplineGrid& g) {
    const int k = g.degree;
    LocalBasis out;
    const double lo = g.domain_lo(), hi = g.domain_hi();
    if (x < lo) {
        x = lo;
        out.clamped = true;
    } else if (x > hi) {
        x = hi;
        out.clamped = true;
    }
    const int s = detail::find_span(x, g);
    out.offset = s - k;
    out.count = k + 1;

    std::array<double, 8> left{}, right{};
    out.values[0] = 1.0;
    for (int d = 1; d <= k; ++d) {
        left[d] = x - g.knots[s + 1 - d];
        right[d] = g.knots[s + d] - x;
        double saved = 0.0;
        for (int r = 0; r < d; ++r) {
            const double tmp = out.values[r] / (right[r + 1] + left[d - r]);
            out.values[r] = saved + right[r + 1] * tmp;
            saved = left[d - r] * tmp;
        }
        out.values[d] = saved;
    }
    return out;
}

// Nonzero basis functions and their first derivatives at x. Derivatives are
// zero when x lies beyond the grid extent (the evaluation is clamped there,
// so the spline is locally constant in the unclamped variable).
inline void local_bspline_with_derivative(double x, const SplineGrid& g, LocalBasis& basis,
                                          LocalBasis& deriv) {
    const int k = g.degree;
    basis = local_bspline(x, g);
    deriv.offset = basis.offset;
    deriv.count = basis.count;
    deriv.clamped = basis.clamped;
    deriv.values.fill(0.0);
    if (k == 0 || basis.clamped) return;

    // Basis of degree k-1 at the same point spans indices [s-k+1, s] in the
    // degree-(k-1) numbering; combine adjacent pairs scaled by knot spans.
    const double xc = std::clamp(x, g.domain_lo(), g.domain_hi());
    const int s = detail::find_span(xc, g);
    std::array<double, 8> lower{}, left{}, right{};
    lower[0] = 1.0;
    for (int d = 1; d <= k - 1; ++d) {
        left[d] = xc - g.knots[s + 1 - d];
        right[d] = g.knots[s + d] - xc;
        double saved = 0.0;
        for (int r = 0; r < d; ++r) {
            const double tmp = lower[r] / (right[r + 1] + left[d - r]);
            lower[r] = saved + right[r + 1] * tmp;
            saved = left[d - r] * tmp;
        }
        lower[d] = saved;
    }
    // lower[r] = N_{s-k+1+r, k-1}; dN_{i,k} uses N_{i,k-1} and N_{i+1,k-1}.
    for (int r = 0; r <= k; ++r) {
        const int i = basis.offset + r;
        double val = 0.0;
        const int a = i - (s - k + 1);  // position of N_{i,k-1} in lower
        if (a >= 0 && a <= k - 1) val += lower[a] / (g.knots[i + k] - g.knots[i]);
        const int b = a + 1;  // position of N_{i+1,k-1}
        if (b >= 0 && b <= k - 1) val -= lower[b] / (g.knots[i + k + 1] - g.knots[i + 1]);
        deriv.values[r] = k * val;
    }
}

// Dense basis vector of length grid.basis_count(); entries are >= 0 and sum
// to 1 on the grid interior.
inline std::vector<double> bspline_basis(double x, const SplineGrid& grid) {
    if (!std::isfinite(x)) throw DomainError("bspline_basis: non-finite input");
    const LocalBasis lb = local_bspline(x, grid);
    std::vector<double> out(grid.basis_count(), 0.0);
    for (int r = 0; r < lb.count; ++r) out[lb.offset + r] = lb.values[r];
    return out;
}

inline std::vector<double> bspline_basis(double x, std::span<const double> knots, int degree) {
    return bspline_basis(x, SplineGrid(std::vector<double>(knots.begin(), knots.end()), degree));
}

// One learnable edge function: phi(x) = w_b * silu(x) + w_s * sum c_m B_m(x).
struct SplineFunction {
    SplineGrid grid;
    std::vector<double> coefficients;  // size = grid.basis_count()
    double base_weight = 1.0;
    double spline_weight = 1.0;

    SplineFunction() = default;
    SplineFunction(SplineGrid g, std::vector<double> coeffs, double wb = 1.0, double ws = 1.0)
        : grid(std::move(g)), coefficients(std::move(coeffs)), base_weight(wb), spline_weight(ws) {
        if (static_cast<int>(coefficients.size()) != grid.basis_count())
            throw DomainError("SplineFunction: coefficient count must equal basis count");
    }
};

inline double spline_eval(const SplineFunction& f, double x) {
    if (!std::isfinite(x)) throw DomainError("spline_eval: non-finite input");
    const LocalBasis lb = local_bspline(x, f.grid);
    double s = 0.0;
    for (int r = 0; r < lb.count; ++r) s += f.coefficients[lb.offset + r] * lb.values[r];
    return f.base_weight * silu(x) + f.spline_weight * s;
}

}  // namespace kangura
