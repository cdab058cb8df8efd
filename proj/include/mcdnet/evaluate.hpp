#pragma once

// Dataset evaluation and complexity accounting.

#include <cstdint>
#include <string>
#include <vector>

#include "mcdnet/data.hpp"
#include "mcdnet/metrics.hpp"
#include "mcdnet/model.hpp"
#include "mcdnet/profiler.hpp"

namespace mcdnet {

/// Restores the previous normalization mode on scope exit.
template <typename T>
class ModeGuard {
public:
    ModeGuard(McdNet<T>& model, NormMode mode) : model_(model), previous_(model.mode()) { model.set_mode(mode); }
    ~ModeGuard() { model_.set_mode(previous_); }
    ModeGuard(const ModeGuard&) = delete;
    ModeGuard& operator=(const ModeGuard&) = delete;

private:
    McdNet<T>& model_;
    NormMode previous_;
};

/// Runs inference over `samples` and accumulates one global confusion.
template <typename T>
ConfusionCounts evaluate_counts(McdNet<T>& model, const std::vector<Sample>& samples, std::size_t batch_size = 8) {
    if (samples.empty()) throw DataError("evaluate: empty dataset");
    if (batch_size == 0) throw std::invalid_argument("evaluate: batch size must be positive");
    ModeGuard<T> guard(model, NormMode::inference);
    NoGradGuard no_grad;
    ConfusionCounts counts;
    for (std::size_t start = 0; start < samples.size(); start += batch_size) {
        std::vector<const Sample*> batch;
        for (std::size_t i = start; i < std::min(samples.size(), start + batch_size); ++i) batch.push_back(&samples[i]);
        auto [images, labels] = make_batch<T>(batch);
        const auto pred = predict(model.forward(images));
        accumulate_confusion(pred, labels, counts);
    }
    return counts;
}

template <typename T>
MetricsReport evaluate(McdNet<T>& model, const std::vector<Sample>& samples, std::size_t batch_size = 8) {
    return compute_metrics(evaluate_counts(model, samples, batch_size));
}

// ------------------------------------------------------------- complexity

template <typename T>
std::uint64_t count_params(const McdNet<T>& model) {
    return model.registry().param_count();
}

template <typename T>
std::uint64_t count_macs(const McdNet<T>& model, std::size_t h, std::size_t w) {
    return model.trace_costs(h, w).total_macs();
}

struct ComplexityReport {
    std::uint64_t params = 0;
    std::uint64_t macs = 0;
    std::uint64_t flops = 0;  // 2·MACs
    // MACs of terms that scale with input area
    std::uint64_t spatial_macs = 0;
    std::size_t height = 0, width = 0;
    std::vector<LayerCost> layers;
};

template <typename T>
ComplexityReport complexity(const McdNet<T>& model, std::size_t h, std::size_t w) {
    const CostRecorder rec = model.trace_costs(h, w);
    ComplexityReport r;
    r.params = count_params(model);
    r.macs = rec.total_macs();
    r.flops = 2 * r.macs;
    for (const auto& l : rec.layers())
        if (l.spatial) r.spatial_macs += l.macs;
    r.height = h;
    r.width = w;
    r.layers = rec.layers();
    return r;
}

}  // namespace mcdnet
