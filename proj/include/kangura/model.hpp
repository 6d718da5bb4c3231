#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "kangura/attention.hpp"
#include "kangura/error.hpp"
#include "kangura/graph.hpp"
#include "kangura/kan.hpp"
#include "kangura/loss.hpp"
#include "kangura/pointcloud.hpp"

namespace kangura {

// Every hyperparameter of the full pipeline in one place.
struct ModelConfig {
    GraphConfig graph;                // sigma 0.2, tau 0.4, self loops, random-walk norm
    double split_fraction = 0.5;      // spectral band boundary as an index fraction
    std::vector<int> kan_hidden;      // hidden dims per branch; empty -> {2*channels}
    bool ka_width = false;            // force a single hidden layer of width 2*channels + 1
    int grid_intervals = 8;           // spline grid intervals G
    int spline_degree = 3;
    double grid_extent = 2.0;
    int d_att = 0;                    // attention dim; 0 -> channels
    int num_classes = 2;
    int channels = 3;
    int points = 256;                 // sampled cloud size expected by forward
    std::uint64_t seed = 0;
    bool ura_raw = false;             // unnormalized bilinear attention scores
    bool share_branches = false;      // one KAN stack serves both branches

    int attention_dim() const { return d_att > 0 ? d_att : channels; }
    int pooled_dim() const { return 4 * channels; }

    std::vector<int> stack_dims() const {
        std::vector<int> dims{channels};
        if (ka_width) {
            dims.push_back(2 * channels + 1);
        } else if (kan_hidden.empty()) {
            dims.push_back(2 * channels);
        } else {
            for (int h : kan_hidden) dims.push_back(h);
        }
        dims.push_back(channels);
        return dims;
    }

    void validate() const {
        if (!(split_fraction > 0.0) || !(split_fraction < 1.0))
            throw DomainError("ModelConfig: split_fraction must be in (0, 1)");
        if (grid_intervals < 1 || spline_degree < 0 || !(grid_extent > 0.0))
            throw DomainError("ModelConfig: invalid spline grid settings");
        if (num_classes < 1 || channels < 1 || points < 2)
            throw DomainError("ModelConfig: counts must be positive (points >= 2)");
        if (d_att < 0) throw DomainError("ModelConfig: d_att must be >= 0");
        for (int h : kan_hidden)
            if (h < 1) throw DomainError("ModelConfig: hidden dims must be positive");
    }
};

// Full parameter set. Parameters are enumerable in a fixed order (see
// visit_parameters) used for gradient vectors, the optimizer, and
// checkpoints:
//   kan_sharp layers -> kan_gentle layers (absent when share_branches) ->
//   ura.theta_o, theta_s, phi_o, phi_g -> head.weights, head.bias,
// with each KAN edge (row-major over outputs x inputs) contributing
// [base_weight, spline_weight, coefficients...].
struct Model {
    ModelConfig config;
    KanStack kan_sharp;
    KanStack kan_gentle;  // empty when config.share_branches
    UraBlock ura;
    ClassifierHead head;

    const KanStack& gentle_stack() const { return config.share_branches ? kan_sharp : kan_gentle; }
};

// Deterministic initialization from config.seed: one stream, consumed in
// registry order. The classifier head starts at zero, so a fresh model emits
// logits equal to its bias vector.
inline Model make_model(const ModelConfig& config) {
    config.validate();
    Model m;
    m.config = config;
    SeededRng rng(config.seed);
    const SplineGrid grid =
        SplineGrid::uniform(config.grid_extent, config.grid_intervals, config.spline_degree);
    const auto dims = m.config.stack_dims();
    m.kan_sharp = make_kan_stack(dims, grid, rng);
    if (!config.share_branches) m.kan_gentle = make_kan_stack(dims, grid, rng);
    m.ura = UraBlock(config.channels, config.attention_dim(), rng);
    m.head = ClassifierHead(config.pooled_dim(), config.num_classes);
    return m;
}

// ---- parameter registry ---------------------------------------------------

namespace detail {

template <class StackT, class F>
void visit_stack(const char* prefix, StackT& stack, F&& f) {
    for (std::size_t l = 0; l < stack.layers.size(); ++l) {
        auto& layer = stack.layers[l];
        for (std::size_t e = 0; e < layer.edges.size(); ++e) {
            auto& edge = layer.edges[e];
            const std::string base =
                std::string(prefix) + ".l" + std::to_string(l) + ".e" + std::to_string(e);
            f(base + ".wb", &edge.base_weight, std::size_t{1});
            f(base + ".ws", &edge.spline_weight, std::size_t{1});
            f(base + ".coeffs", edge.coefficients.data(), edge.coefficients.size());
        }
    }
}

template <class ModelT, class F>
void visit_parameters_impl(ModelT& m, F&& f) {
    visit_stack("kan_sharp", m.kan_sharp, f);
    if (!m.config.share_branches) visit_stack("kan_gentle", m.kan_gentle, f);
    f("ura.theta_o", m.ura.theta_o.data(), m.ura.theta_o.size());
    f("ura.theta_s", m.ura.theta_s.data(), m.ura.theta_s.size());
    f("ura.phi_o", m.ura.phi_o.data(), m.ura.phi_o.size());
    f("ura.phi_g", m.ura.phi_g.data(), m.ura.phi_g.size());
    f("head.weights", m.head.weights.data(), m.head.weights.size());
    f("head.bias", m.head.bias.data(), m.head.bias.size());
}

}  // namespace detail

template <class F>
void visit_parameters(Model& m, F&& f) {
    detail::visit_parameters_impl(m, f);
}
template <class F>
void visit_parameters(const Model& m, F&& f) {
    detail::visit_parameters_impl(m, f);
}

struct ParamView {
    std::string name;
    double* data;
    std::size_t size;
};

inline std::vector<ParamView> parameter_views(Model& m) {
    std::vector<ParamView> views;
    visit_parameters(m, [&](std::string name, double* data, std::size_t n) {
        views.push_back({std::move(name), data, n});
    });
    return views;
}

inline std::size_t parameter_count(const Model& m) {
    std::size_t total = 0;
    visit_parameters(m, [&](const std::string&, const double*, std::size_t n) { total += n; });
    return total;
}

inline std::vector<double> flatten_parameters(const Model& m) {
    std::vector<double> flat;
    flat.reserve(parameter_count(m));
    visit_parameters(m, [&](const std::string&, const double* data, std::size_t n) {
        flat.insert(flat.end(), data, data + n);
    });
    return flat;
}

inline void unflatten_parameters(Model& m, std::span<const double> flat) {
    std::size_t offset = 0;
    visit_parameters(m, [&](const std::string&, double* data, std::size_t n) {
        if (offset + n > flat.size()) throw DomainError("unflatten_parameters: vector too short");
        std::copy(flat.begin() + offset, flat.begin() + offset + n, data);
        offset += n;
    });
    if (offset != flat.size()) throw DomainError("unflatten_parameters: vector length mismatch");
}

// Uniformly randomizes every parameter. Gradient checking uses this so that
// no path is probed at a vacuous zero point (a zero head blocks gradient
// flow into everything upstream).
inline void randomize_parameters(Model& m, SeededRng& rng, double bound = 0.5) {
    visit_parameters(m, [&](const std::string&, double* data, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) data[i] = rng.uniform(-bound, bound);
    });
}

// ---- forward / backward ---------------------------------------------------

// Per-cloud outputs of the full pipeline.
struct FusionOutput {
    Matrix refined_sharp;        // Y_s
    Matrix refined_gentle;       // Y_g
    Matrix fused;                // Z = [Y_s | Y_g]
    std::vector<double> pooled;  // column max ++ column mean of Z
    std::vector<double> logits;
};

namespace detail {

struct ForwardTrace {
    Matrix kan_s_out, kan_g_out;
    AttentionForward att;
};

inline ForwardTrace model_forward_trace(const Model& m, const SpectralFeatures& features) {
    if (features.x.cols() != m.config.channels)
        throw DomainError("forward: channel count differs from model config");
    ensure_finite(features.x, "spectral_features");
    ensure_finite(features.sharp, "spectral_features");
    ensure_finite(features.gentle, "spectral_features");

    ForwardTrace t;
    t.kan_s_out = kan_stack_forward(m.kan_sharp, features.sharp);
    ensure_finite(t.kan_s_out, "kan_sharp");
    t.kan_g_out = kan_stack_forward(m.gentle_stack(), features.gentle);
    ensure_finite(t.kan_g_out, "kan_gentle");
    t.att = attention_head_forward(m.ura, m.head, features.x, t.kan_s_out, t.kan_g_out,
                                   m.config.ura_raw);
    ensure_finite(t.att.fused, "attention");
    for (double v : t.att.logits)
        if (!std::isfinite(v)) throw NumericError("non-finite values at stage: classify");
    return t;
}

}  // namespace detail

inline FusionOutput model_forward(const Model& m, const SpectralFeatures& features) {
    detail::ForwardTrace t = detail::model_forward_trace(m, features);
    FusionOutput out;
    out.refined_sharp = std::move(t.att.y_s);
    out.refined_gentle = std::move(t.att.y_g);
    out.fused = std::move(t.att.fused);
    out.pooled = std::move(t.att.pooled);
    out.logits = std::move(t.att.logits);
    return out;
}

// Convenience path from a raw cloud; the cloud must already be normalized
// and sampled to config.points.
inline FusionOutput model_forward(const Model& m, const PointCloud& cloud) {
    return model_forward(m, disentangle(cloud, m.config.graph, m.config.split_fraction));
}

struct ModelGrads {
    KanStackGrad kan_sharp;
    KanStackGrad kan_gentle;  // unused when share_branches
    UraGrads ura;
    HeadGrads head;
};

struct BackwardOutput {
    double loss = 0.0;
    std::vector<double> logits;
    ModelGrads grads;
};

namespace detail {

inline void accumulate(KanStackGrad& acc, const KanStackGrad& g) {
    for (std::size_t l = 0; l < acc.layers.size(); ++l)
        for (std::size_t e = 0; e < acc.layers[l].edges.size(); ++e) {
            auto& a = acc.layers[l].edges[e];
            const auto& b = g.layers[l].edges[e];
            a.base_weight += b.base_weight;
            a.spline_weight += b.spline_weight;
            for (std::size_t i = 0; i < a.coefficients.size(); ++i)
                a.coefficients[i] += b.coefficients[i];
        }
}

}  // namespace detail

// Exact cross-entropy gradient for every parameter. The spectral features
// depend only on the cloud's coordinates, so no gradient flows into them.
inline BackwardOutput model_backward(const Model& m, const SpectralFeatures& features, int label) {
    if (label < 0 || label >= m.config.num_classes)
        throw DomainError("backward: label out of range");
    detail::ForwardTrace t = detail::model_forward_trace(m, features);

    BackwardOutput out;
    out.loss = cross_entropy(t.att.logits, label);
    out.logits = t.att.logits;

    const std::vector<double> dlogits = cross_entropy_gradient(t.att.logits, label);
    AttentionBackward ab = attention_head_backward(m.ura, m.head, features.x, t.kan_s_out,
                                                   t.kan_g_out, t.att, dlogits, m.config.ura_raw);
    out.grads.ura = std::move(ab.ura);
    out.grads.head = std::move(ab.head);

    out.grads.kan_sharp =
        kan_stack_backward(m.kan_sharp, features.sharp, ab.grad_kan_s).grads;
    KanStackGrad gentle =
        kan_stack_backward(m.gentle_stack(), features.gentle, ab.grad_kan_g).grads;
    if (m.config.share_branches)
        detail::accumulate(out.grads.kan_sharp, gentle);
    else
        out.grads.kan_gentle = std::move(gentle);
    return out;
}

// Gradient vector in registry order (see visit_parameters).
inline std::vector<double> flatten_gradients(const Model& m, const ModelGrads& g) {
    std::vector<double> flat;
    flat.reserve(parameter_count(m));
    auto push_stack = [&](const KanStackGrad& sg) {
        for (const auto& layer : sg.layers)
            for (const auto& e : layer.edges) {
                flat.push_back(e.base_weight);
                flat.push_back(e.spline_weight);
                flat.insert(flat.end(), e.coefficients.begin(), e.coefficients.end());
            }
    };
    push_stack(g.kan_sharp);
    if (!m.config.share_branches) push_stack(g.kan_gentle);
    for (const Matrix* mat : {&g.ura.theta_o, &g.ura.theta_s, &g.ura.phi_o, &g.ura.phi_g})
        flat.insert(flat.end(), mat->storage().begin(), mat->storage().end());
    flat.insert(flat.end(), g.head.weights.storage().begin(), g.head.weights.storage().end());
    flat.insert(flat.end(), g.head.bias.begin(), g.head.bias.end());
    return flat;
}

// Spec-shaped entry point: gradient of the cross-entropy loss with respect
// to every parameter, in registry order.
inline std::vector<double> model_backward_flat(const Model& m, const PointCloud& cloud, int label,
                                               double* loss_out = nullptr) {
    const SpectralFeatures features = disentangle(cloud, m.config.graph, m.config.split_fraction);
    BackwardOutput out = model_backward(m, features, label);
    if (loss_out) *loss_out = out.loss;
    return flatten_gradients(m, out.grads);
}

}  // namespace kangura
