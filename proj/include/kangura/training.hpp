#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "kangura/checkpoint.hpp"
#include "kangura/error.hpp"
#include "kangura/loss.hpp"
#include "kangura/metrics.hpp"
#include "kangura/model.hpp"
#include "kangura/parallel.hpp"
#include "kangura/pointcloud.hpp"

namespace kangura {

struct TrainConfig {
    int epochs = 60;
    int batch_size = 16;
    double learning_rate = 1e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    std::uint64_t seed = 0;
    AugmentConfig augment;  // applied to training clouds only
    int threads = 0;        // 0 -> all hardware threads

    void validate() const {
        if (epochs < 1) throw DomainError("TrainConfig: epochs must be >= 1");
        if (batch_size < 1) throw DomainError("TrainConfig: batch_size must be >= 1");
        if (!(learning_rate > 0.0)) throw DomainError("TrainConfig: learning_rate must be > 0");
        if (adam_beta1 < 0.0 || adam_beta1 >= 1.0 || adam_beta2 < 0.0 || adam_beta2 >= 1.0)
            throw DomainError("TrainConfig: betas must lie in [0, 1)");
        if (!(adam_eps > 0.0)) throw DomainError("TrainConfig: adam_eps must be > 0");
    }
};

// ---- Adam -------------------------------------------------------------------

struct AdamState {
    std::vector<double> m;  // first moment
    std::vector<double> v;  // second moment

    explicit AdamState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

// Standard bias-corrected update, applied element-wise in registry order.
// t is the 1-based step index.
inline void adam_step(std::vector<double>& params, const std::vector<double>& grads,
                      AdamState& state, const TrainConfig& cfg, long long t) {
    if (params.size() != grads.size() || params.size() != state.m.size() ||
        params.size() != state.v.size())
        throw DomainError("adam_step: shape mismatch");
    if (t < 1) throw DomainError("adam_step: step index must be >= 1");
    const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
    const double corr1 = 1.0 - std::pow(b1, static_cast<double>(t));
    const double corr2 = 1.0 - std::pow(b2, static_cast<double>(t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * grads[i];
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * grads[i] * grads[i];
        const double mhat = state.m[i] / corr1;
        const double vhat = state.v[i] / corr2;
        params[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.adam_eps);
    }
}

// ---- preprocessing ----------------------------------------------------------

// Samples to the model's configured size (seeded, without replacement when
// possible) and normalizes to the unit sphere.
inline PointCloud preprocess_cloud(const PointCloud& cloud, int points, std::uint64_t seed) {
    if (cloud.size() == points) return normalize_unit_sphere(cloud);
    SeededRng rng(seed);
    return normalize_unit_sphere(sample_points(cloud, points, rng));
}

namespace detail {

inline std::vector<SpectralFeatures> features_of(const std::vector<PointCloud>& clouds,
                                                 const ModelConfig& cfg, int threads) {
    std::vector<SpectralFeatures> features(clouds.size());
    parallel_for(clouds.size(), threads, [&](std::size_t i) {
        features[i] = disentangle(clouds[i], cfg.graph, cfg.split_fraction);
    });
    return features;
}

inline Metrics evaluate_features(const Model& model, const std::vector<SpectralFeatures>& features,
                                 const std::vector<int>& labels, int threads) {
    const int k = model.config.num_classes;
    std::vector<int> predicted(features.size());
    parallel_for(features.size(), threads, [&](std::size_t i) {
        const auto logits = model_forward(model, features[i]).logits;
        int arg = 0;
        for (int c = 1; c < k; ++c)
            if (logits[c] > logits[arg]) arg = c;
        predicted[i] = arg;
    });
    std::vector<std::vector<std::int64_t>> confusion(k, std::vector<std::int64_t>(k, 0));
    for (std::size_t i = 0; i < features.size(); ++i) ++confusion[labels[i]][predicted[i]];
    return metrics_from_confusion(std::move(confusion));
}

inline void check_dataset(const Dataset& ds, const ModelConfig& cfg, const char* what) {
    if (ds.clouds.empty()) throw DomainError(std::string(what) + ": empty dataset");
    if (ds.num_classes() != cfg.num_classes)
        throw DomainError(std::string(what) + ": dataset has " +
                          std::to_string(ds.num_classes()) + " classes, model expects " +
                          std::to_string(cfg.num_classes));
    for (const PointCloud& c : ds.clouds)
        if (!c.label || *c.label < 0 || *c.label >= cfg.num_classes)
            throw DomainError(std::string(what) + ": cloud without a valid label");
}

}  // namespace detail

// ---- evaluation -------------------------------------------------------------

// Deterministic pass with no augmentation; predictions by argmax (ties to
// the lowest class index), metrics derived from the confusion matrix only.
inline Metrics evaluate(const Model& model, const Dataset& data, int threads = 0) {
    detail::check_dataset(data, model.config, "evaluate");
    std::vector<PointCloud> clouds(data.clouds.size());
    std::vector<int> labels(data.clouds.size());
    parallel_for(data.clouds.size(), threads, [&](std::size_t i) {
        clouds[i] = preprocess_cloud(data.clouds[i], model.config.points,
                                     hash_combine64(model.config.seed, 0xe5a1 + i));
        labels[i] = *data.clouds[i].label;
    });
    const auto features = detail::features_of(clouds, model.config, threads);
    return detail::evaluate_features(model, features, labels, threads);
}

// ---- training ---------------------------------------------------------------

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double val_accuracy = 0.0;
};

struct TrainResult {
    Model model;  // parameters of the best validation epoch
    std::vector<EpochRecord> history;
    int best_epoch = 0;
};

// Seeded shuffles, fixed-order gradient accumulation, Adam updates, and
// best-validation-accuracy checkpoint selection. Bit-reproducible for a
// given (seed, config, datasets) regardless of the thread count: every
// random draw is keyed by (seed, epoch, cloud index) and the per-batch
// reduction runs in index order.
inline TrainResult train(Model model, const Dataset& train_set, const Dataset& val_set,
                         const TrainConfig& cfg) {
    cfg.validate();
    detail::check_dataset(train_set, model.config, "train");
    detail::check_dataset(val_set, model.config, "train(val)");

    const int threads = cfg.threads;
    const std::size_t n_train = train_set.clouds.size();

    std::vector<PointCloud> train_clouds(n_train);
    std::vector<int> train_labels(n_train);
    parallel_for(n_train, threads, [&](std::size_t i) {
        train_clouds[i] = preprocess_cloud(train_set.clouds[i], model.config.points,
                                           hash_combine64(cfg.seed, 0x5a3f + i));
        train_labels[i] = *train_set.clouds[i].label;
    });
    std::vector<PointCloud> val_clouds(val_set.clouds.size());
    std::vector<int> val_labels(val_set.clouds.size());
    parallel_for(val_set.clouds.size(), threads, [&](std::size_t i) {
        val_clouds[i] = preprocess_cloud(val_set.clouds[i], model.config.points,
                                         hash_combine64(cfg.seed, 0x7a11 + i));
        val_labels[i] = *val_set.clouds[i].label;
    });

    // The spectral stage depends only on coordinates, so without
    // augmentation each cloud's features are computed once and reused for
    // every epoch.
    const bool augmenting = cfg.augment.enabled();
    std::vector<SpectralFeatures> train_features;
    if (!augmenting) train_features = detail::features_of(train_clouds, model.config, threads);
    const std::vector<SpectralFeatures> val_features =
        detail::features_of(val_clouds, model.config, threads);

    std::vector<double> theta = flatten_parameters(model);
    AdamState adam(theta.size());
    long long step = 0;

    TrainResult result;
    double best_accuracy = -1.0;
    std::vector<double> best_theta = theta;

    std::vector<std::size_t> order(n_train);
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        if (augmenting) {
            train_features.assign(n_train, SpectralFeatures{});
            parallel_for(n_train, threads, [&](std::size_t i) {
                SeededRng rng(hash_combine64(hash_combine64(cfg.seed, 0xa19 + epoch), i));
                const PointCloud aug =
                    normalize_unit_sphere(augment(train_clouds[i], cfg.augment, rng));
                train_features[i] =
                    disentangle(aug, model.config.graph, model.config.split_fraction);
            });
        }

        SeededRng shuffle_rng(hash_combine64(cfg.seed, 0x50f1e + epoch));
        for (std::size_t i = 0; i < n_train; ++i) {
            const std::size_t j =
                i + shuffle_rng.uniform_int(static_cast<std::uint64_t>(n_train - i));
            std::swap(order[i], order[j]);
        }

        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < n_train; start += cfg.batch_size) {
            const std::size_t stop = std::min(n_train, start + cfg.batch_size);
            const std::size_t count = stop - start;
            std::vector<std::vector<double>> slot_grads(count);
            std::vector<double> slot_loss(count, 0.0);
            parallel_for(count, threads, [&](std::size_t s) {
                const std::size_t idx = order[start + s];
                BackwardOutput out =
                    model_backward(model, train_features[idx], train_labels[idx]);
                slot_grads[s] = flatten_gradients(model, out.grads);
                slot_loss[s] = out.loss;
            });
            std::vector<double> grads(theta.size(), 0.0);
            for (std::size_t s = 0; s < count; ++s) {
                epoch_loss += slot_loss[s];
                for (std::size_t i = 0; i < grads.size(); ++i) grads[i] += slot_grads[s][i];
            }
            const double inv = 1.0 / static_cast<double>(count);
            for (double& g : grads) g *= inv;
            adam_step(theta, grads, adam, cfg, ++step);
            unflatten_parameters(model, theta);
        }
        epoch_loss /= static_cast<double>(n_train);

        const Metrics val =
            detail::evaluate_features(model, val_features, val_labels, threads);
        result.history.push_back({epoch, epoch_loss, val.accuracy});
        if (val.accuracy > best_accuracy) {
            best_accuracy = val.accuracy;
            best_theta = theta;
            result.best_epoch = epoch;
        }
    }

    unflatten_parameters(model, best_theta);
    result.model = std::move(model);
    return result;
}

// Seeded stratified split of a dataset into (kept, held-out) with the given
// held-out fraction per class; used for the default 80/20 validation split.
inline std::pair<Dataset, Dataset> stratified_split(const Dataset& ds, double holdout_fraction,
                                                    std::uint64_t seed) {
    if (!(holdout_fraction >= 0.0) || !(holdout_fraction < 1.0))
        throw DomainError("stratified_split: fraction must be in [0, 1)");
    Dataset kept, held;
    kept.class_names = ds.class_names;
    held.class_names = ds.class_names;

    std::vector<std::vector<std::size_t>> by_class(ds.class_names.size());
    for (std::size_t i = 0; i < ds.clouds.size(); ++i) {
        const auto& c = ds.clouds[i];
        if (!c.label || *c.label < 0 || *c.label >= ds.num_classes())
            throw DomainError("stratified_split: cloud without a valid label");
        by_class[*c.label].push_back(i);
    }
    std::vector<char> is_held(ds.clouds.size(), 0);
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        auto& idx = by_class[c];
        SeededRng rng(hash_combine64(seed, 0x517a + c));
        for (std::size_t i = 0; i < idx.size(); ++i) {
            const std::size_t j = i + rng.uniform_int(static_cast<std::uint64_t>(idx.size() - i));
            std::swap(idx[i], idx[j]);
        }
        const std::size_t held_count =
            static_cast<std::size_t>(std::floor(holdout_fraction * static_cast<double>(idx.size())));
        for (std::size_t i = 0; i < held_count; ++i) is_held[idx[i]] = 1;
    }
    for (std::size_t i = 0; i < ds.clouds.size(); ++i)
        (is_held[i] ? held : kept).clouds.push_back(ds.clouds[i]);
    return {std::move(kept), std::move(held)};
}

// ---- gradient checking --------------------------------------------------------

struct GradCheckEntry {
    std::string name;      // registry tensor name plus offset
    double analytic = 0.0;
    double numeric = 0.0;
    double rel_error = 0.0;
};

struct GradCheckReport {
    double max_rel_error = 0.0;
    double mean_rel_error = 0.0;
    std::string worst_parameter;
    std::vector<GradCheckEntry> entries;
};

// Central finite differences (loss(theta+h) - loss(theta-h)) / 2h against
// the analytic gradient for every parameter; relative errors use the
// denominator max(|analytic|, |numeric|, 1e-8). The spectral features are
// parameter-independent, so they are computed once.
inline GradCheckReport grad_check(const Model& model, const PointCloud& cloud, int label,
                                  double h) {
    if (!(h > 0.0)) throw DomainError("grad_check: h must be > 0");
    const SpectralFeatures features =
        disentangle(cloud, model.config.graph, model.config.split_fraction);

    Model work = model;
    const std::vector<double> analytic =
        flatten_gradients(work, model_backward(work, features, label).grads);
    std::vector<double> theta = flatten_parameters(work);

    std::vector<std::pair<std::string, std::size_t>> names;  // (tensor name, first flat index)
    std::size_t offset = 0;
    visit_parameters(work, [&](const std::string& name, const double*, std::size_t n) {
        names.emplace_back(name, offset);
        offset += n;
    });
    auto name_of = [&](std::size_t flat) {
        std::size_t lo = 0;
        for (std::size_t k = 0; k < names.size(); ++k)
            if (names[k].second <= flat) lo = k;
        return names[lo].first + "[" + std::to_string(flat - names[lo].second) + "]";
    };

    GradCheckReport report;
    report.entries.reserve(theta.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < theta.size(); ++i) {
        const double orig = theta[i];
        theta[i] = orig + h;
        unflatten_parameters(work, theta);
        const double fp = cross_entropy(model_forward(work, features).logits, label);
        theta[i] = orig - h;
        unflatten_parameters(work, theta);
        const double fm = cross_entropy(model_forward(work, features).logits, label);
        theta[i] = orig;
        const double numeric = (fp - fm) / (2.0 * h);
        const double rel = std::fabs(analytic[i] - numeric) /
                           std::max({std::fabs(analytic[i]), std::fabs(numeric), 1e-8});
        report.entries.push_back({name_of(i), analytic[i], numeric, rel});
        sum += rel;
        if (rel > report.max_rel_error) {
            report.max_rel_error = rel;
            report.worst_parameter = report.entries.back().name;
        }
    }
    unflatten_parameters(work, theta);
    report.mean_rel_error = theta.empty() ? 0.0 : sum / static_cast<double>(theta.size());
    return report;
}

// ---- history CSV --------------------------------------------------------------

// Header note (e.g. the validation split) goes into a leading comment line;
// numeric fields use full round-trip precision so identical runs produce
// byte-identical files.
inline void write_history_csv(const std::vector<EpochRecord>& history,
                              const std::filesystem::path& path, const std::string& note = "") {
    std::ofstream out(path);
    if (!out) throw Error("write_history_csv: cannot open " + path.string());
    if (!note.empty()) out << "# " << note << '\n';
    out << "epoch,train_loss,val_accuracy\n";
    char buf[96];
    for (const EpochRecord& r : history) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g\n", r.epoch, r.train_loss, r.val_accuracy);
        out << buf;
    }
    if (!out) throw Error("write_history_csv: write failed for " + path.string());
}

}  // namespace kangura
