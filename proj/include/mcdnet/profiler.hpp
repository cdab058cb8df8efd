#pragma once

// Multiply-accumulate accounting shared by the analytic cost walk and the
// operator-level recorder that observes real forward passes.

#include <cstdint>
#include <string>
#include <vector>

#include "mcdnet/tensor.hpp"

namespace mcdnet {

enum class CostKind { conv, linear, attention, pooled_conv, norm };

inline const char* to_string(CostKind kind) {
    switch (kind) {
        case CostKind::conv: return "conv";
        case CostKind::linear: return "linear";
        case CostKind::attention: return "attention";
        case CostKind::pooled_conv: return "pooled_conv";
        case CostKind::norm: return "norm";
    }
    return "?";
}

struct LayerCost {
    std::string name;
    CostKind kind = CostKind::conv;
    Shape output;
    std::uint64_t params = 0;
    std::uint64_t macs = 0;
    // False for terms that do not grow with input area (global-pool branch,
    // attention MLP on pooled descriptors).
    bool spatial = true;
};

class CostRecorder {
public:
    void add(LayerCost cost) { layers_.push_back(std::move(cost)); }
    const std::vector<LayerCost>& layers() const { return layers_; }

    std::uint64_t total_macs() const {
        std::uint64_t s = 0;
        for (const auto& l : layers_) s += l.macs;
        return s;
    }

private:
    std::vector<LayerCost> layers_;
};

namespace detail {
inline thread_local CostRecorder* active_recorder = nullptr;
}

/// Routes MACs of every conv2d/linear executed on this thread into `recorder`.
class ScopedOpRecorder {
public:
    explicit ScopedOpRecorder(CostRecorder& recorder) : previous_(detail::active_recorder) {
        detail::active_recorder = &recorder;
    }
    ~ScopedOpRecorder() { detail::active_recorder = previous_; }
    ScopedOpRecorder(const ScopedOpRecorder&) = delete;
    ScopedOpRecorder& operator=(const ScopedOpRecorder&) = delete;

private:
    CostRecorder* previous_;
};

namespace detail {
inline void record_op(const char* name, CostKind kind, const Shape& out, std::uint64_t macs) {
    if (active_recorder) active_recorder->add({name, kind, out, 0, macs, true});
}
}  // namespace detail

}  // namespace mcdnet
