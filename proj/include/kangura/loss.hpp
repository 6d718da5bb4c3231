#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "kangura/error.hpp"

namespace kangura {

// Max-shifted softmax; safe against overflow for large logits.
inline std::vector<double> softmax(std::span<const double> logits) {
    if (logits.empty()) throw DomainError("softmax: empty logits");
    double mx = logits[0];
    for (double v : logits) mx = std::max(mx, v);
    std::vector<double> out(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - mx);
        sum += out[i];
    }
    const double inv = 1.0 / sum;
    for (double& v : out) v *= inv;
    return out;
}

// -log softmax(logits)[label], computed via the max-shift trick.
inline double cross_entropy(std::span<const double> logits, int label) {
    if (label < 0 || label >= static_cast<int>(logits.size()))
        throw DomainError("cross_entropy: label out of range");
    double mx = logits[0];
    for (double v : logits) mx = std::max(mx, v);
    double sum = 0.0;
    for (double v : logits) sum += std::exp(v - mx);
    return std::log(sum) - (logits[label] - mx);
}

// d loss / d logits = softmax(logits) - one_hot(label).
inline std::vector<double> cross_entropy_gradient(std::span<const double> logits, int label) {
    if (label < 0 || label >= static_cast<int>(logits.size()))
        throw DomainError("cross_entropy_gradient: label out of range");
    std::vector<double> g = softmax(logits);
    g[label] -= 1.0;
    return g;
}

}  // namespace kangura
