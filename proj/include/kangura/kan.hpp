#pragma once

#include <utility>
#include <vector>

#include "kangura/error.hpp"
#include "kangura/matrix.hpp"
#include "kangura/rng.hpp"
#include "kangura/spline.hpp"

namespace kangura {

// One Kolmogorov-Arnold layer: a learnable univariate function on every
// (output, input) edge, summed at the output nodes,
//   out[p, j] = sum_i phi_{j,i}(x[p, i]).
// All edges share the layer's grid; rows (points) are independent.
struct KanLayer {
    int in_dim = 0;
    int out_dim = 0;
    std::vector<SplineFunction> edges;  // row-major [j * in_dim + i]

    KanLayer() = default;

    // Spline coefficients start uniform in [-0.1, 0.1]; both mixing weights
    // start at 1.
    KanLayer(int in, int out, const SplineGrid& grid, SeededRng& rng) : in_dim(in), out_dim(out) {
        if (in < 1 || out < 1) throw DomainError("KanLayer: dimensions must be positive");
        edges.reserve(static_cast<std::size_t>(in) * out);
        const int nb = grid.basis_count();
        for (int j = 0; j < out; ++j)
            for (int i = 0; i < in; ++i) {
                std::vector<double> coeffs(nb);
                for (double& c : coeffs) c = rng.uniform(-0.1, 0.1);
                edges.emplace_back(grid, std::move(coeffs), 1.0, 1.0);
            }
    }

    const SplineFunction& edge(int j, int i) const { return edges[static_cast<std::size_t>(j) * in_dim + i]; }
    SplineFunction& edge(int j, int i) { return edges[static_cast<std::size_t>(j) * in_dim + i]; }
    const SplineGrid& grid() const { return edges.front().grid; }
};

inline Matrix kan_layer_forward(const KanLayer& layer, const Matrix& x) {
    if (x.cols() != layer.in_dim) throw DomainError("kan_layer_forward: input width mismatch");
    const int n = x.rows();
    Matrix out(n, layer.out_dim);
    for (int p = 0; p < n; ++p) {
        double* orow = out.data() + static_cast<std::size_t>(p) * layer.out_dim;
        for (int i = 0; i < layer.in_dim; ++i) {
            const double xv = x(p, i);
            const double base = silu(xv);
            const LocalBasis lb = local_bspline(xv, layer.grid());
            for (int j = 0; j < layer.out_dim; ++j) {
                const SplineFunction& e = layer.edge(j, i);
                double sv = 0.0;
                for (int r = 0; r < lb.count; ++r)
                    sv += e.coefficients[lb.offset + r] * lb.values[r];
                orow[j] += e.base_weight * base + e.spline_weight * sv;
            }
        }
    }
    return out;
}

// Stack of layers with chained dimensions; first in_dim and last out_dim
// both equal the feature width so the attention residual Y = X + W*KAN(X)
// stays well-typed.
struct KanStack {
    std::vector<KanLayer> layers;

    int in_dim() const { return layers.front().in_dim; }
    int out_dim() const { return layers.back().out_dim; }
};

// dims = [c, hidden..., c]; every layer uses the same grid.
inline KanStack make_kan_stack(const std::vector<int>& dims, const SplineGrid& grid,
                               SeededRng& rng) {
    if (dims.size() < 2) throw DomainError("make_kan_stack: need at least input and output dims");
    KanStack stack;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l)
        stack.layers.emplace_back(dims[l], dims[l + 1], grid, rng);
    return stack;
}

inline Matrix kan_stack_forward(const KanStack& stack, const Matrix& x) {
    if (stack.layers.empty()) throw DomainError("kan_stack_forward: empty stack");
    Matrix h = kan_layer_forward(stack.layers[0], x);
    for (std::size_t l = 1; l < stack.layers.size(); ++l)
        h = kan_layer_forward(stack.layers[l], h);
    return h;
}

// Gradient holders mirror the parameter layout.
struct SplineFunctionGrad {
    std::vector<double> coefficients;
    double base_weight = 0.0;
    double spline_weight = 0.0;
};

struct KanLayerGrad {
    std::vector<SplineFunctionGrad> edges;
};

struct KanStackGrad {
    std::vector<KanLayerGrad> layers;
};

inline KanStackGrad zero_grads(const KanStack& stack) {
    KanStackGrad g;
    g.layers.resize(stack.layers.size());
    for (std::size_t l = 0; l < stack.layers.size(); ++l) {
        g.layers[l].edges.resize(stack.layers[l].edges.size());
        for (std::size_t e = 0; e < stack.layers[l].edges.size(); ++e)
            g.layers[l].edges[e].coefficients.assign(stack.layers[l].edges[e].coefficients.size(),
                                                     0.0);
    }
    return g;
}

namespace detail {

// Backward through one layer given its input activations: accumulates into
// grads and returns the gradient with respect to the layer input.
inline Matrix kan_layer_backward(const KanLayer& layer, const Matrix& x, const Matrix& upstream,
                                 KanLayerGrad& grads) {
    const int n = x.rows();
    Matrix grad_x(n, layer.in_dim);
    LocalBasis lb, db;
    for (int p = 0; p < n; ++p) {
        const double* urow = upstream.data() + static_cast<std::size_t>(p) * layer.out_dim;
        for (int i = 0; i < layer.in_dim; ++i) {
            const double xv = x(p, i);
            const double base = silu(xv);
            const double dbase = silu_derivative(xv);
            local_bspline_with_derivative(xv, layer.grid(), lb, db);
            double gx = 0.0;
            for (int j = 0; j < layer.out_dim; ++j) {
                const double up = urow[j];
                if (up == 0.0) continue;
                const SplineFunction& e = layer.edge(j, i);
                SplineFunctionGrad& ge = grads.edges[static_cast<std::size_t>(j) * layer.in_dim + i];
                double sv = 0.0, dv = 0.0;
                for (int r = 0; r < lb.count; ++r) {
                    const double c = e.coefficients[lb.offset + r];
                    sv += c * lb.values[r];
                    dv += c * db.values[r];
                    ge.coefficients[lb.offset + r] += up * e.spline_weight * lb.values[r];
                }
                ge.base_weight += up * base;
                ge.spline_weight += up * sv;
                gx += up * (e.base_weight * dbase + e.spline_weight * dv);
            }
            grad_x(p, i) = gx;
        }
    }
    return grad_x;
}

}  // namespace detail

struct KanBackwardResult {
    KanStackGrad grads;
    Matrix grad_input;
};

// Exact analytic gradients of the stack's forward map with respect to all
// coefficients, mixing weights, and the input.
inline KanBackwardResult kan_stack_backward(const KanStack& stack, const Matrix& x,
                                            const Matrix& upstream) {
    if (stack.layers.empty()) throw DomainError("kan_stack_backward: empty stack");
    if (x.cols() != stack.in_dim()) throw DomainError("kan_stack_backward: input width mismatch");
    if (upstream.cols() != stack.out_dim() || upstream.rows() != x.rows())
        throw DomainError("kan_stack_backward: upstream shape mismatch");

    std::vector<Matrix> acts;
    acts.reserve(stack.layers.size() + 1);
    acts.push_back(x);
    for (const KanLayer& layer : stack.layers) acts.push_back(kan_layer_forward(layer, acts.back()));

    KanBackwardResult result;
    result.grads = zero_grads(stack);
    Matrix u = upstream;
    for (std::size_t l = stack.layers.size(); l-- > 0;)
        u = detail::kan_layer_backward(stack.layers[l], acts[l], u, result.grads.layers[l]);
    result.grad_input = std::move(u);
    return result;
}

}  // namespace kangura
