#pragma once

#include <cstdint>
#include <vector>

#include "kangura/error.hpp"

namespace kangura {

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

// All metrics derive from the confusion matrix alone. Rows index the true
// class, columns the predicted class, so row sums equal the per-class
// ground-truth counts. Zero denominators yield 0, never NaN, so imbalanced
// runs with an absent predicted class stay well-defined.
struct Metrics {
    double accuracy = 0.0;
    std::vector<ClassMetrics> per_class;
    std::vector<std::vector<std::int64_t>> confusion;

    int num_classes() const { return static_cast<int>(confusion.size()); }
};

inline Metrics metrics_from_confusion(std::vector<std::vector<std::int64_t>> confusion) {
    const int k = static_cast<int>(confusion.size());
    if (k < 1) throw DomainError("metrics_from_confusion: empty confusion matrix");
    for (const auto& row : confusion)
        if (static_cast<int>(row.size()) != k)
            throw DomainError("metrics_from_confusion: confusion matrix must be square");

    Metrics m;
    m.confusion = std::move(confusion);
    std::int64_t total = 0, trace = 0;
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j) {
            if (m.confusion[i][j] < 0)
                throw DomainError("metrics_from_confusion: negative count");
            total += m.confusion[i][j];
            if (i == j) trace += m.confusion[i][j];
        }
    if (total == 0) throw DomainError("metrics_from_confusion: no samples");
    m.accuracy = static_cast<double>(trace) / static_cast<double>(total);

    m.per_class.resize(k);
    for (int c = 0; c < k; ++c) {
        std::int64_t tp = m.confusion[c][c], row_sum = 0, col_sum = 0;
        for (int j = 0; j < k; ++j) row_sum += m.confusion[c][j];
        for (int i = 0; i < k; ++i) col_sum += m.confusion[i][c];
        ClassMetrics& cm = m.per_class[c];
        cm.precision = col_sum > 0 ? static_cast<double>(tp) / static_cast<double>(col_sum) : 0.0;
        cm.recall = row_sum > 0 ? static_cast<double>(tp) / static_cast<double>(row_sum) : 0.0;
        cm.f1 = (cm.precision + cm.recall) > 0.0
                    ? 2.0 * cm.precision * cm.recall / (cm.precision + cm.recall)
                    : 0.0;
    }
    return m;
}

}  // namespace kangura
