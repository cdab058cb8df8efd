#pragma once

// Pixel-level confusion counts and the segmentation scores derived from them.

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>

namespace mcdnet {

inline constexpr std::size_t kNumClasses = 2;

struct ClassCounts {
    std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
    bool operator==(const ClassCounts&) const = default;
};

/// Binary confusion matrix; entry [g][p] counts pixels with truth g predicted p.
struct ConfusionCounts {
    std::array<std::array<std::uint64_t, kNumClasses>, kNumClasses> matrix{};

    std::uint64_t total() const { return matrix[0][0] + matrix[0][1] + matrix[1][0] + matrix[1][1]; }

    ClassCounts for_class(std::size_t c) const {
        const std::size_t o = 1 - c;
        return {matrix[c][c], matrix[o][c], matrix[c][o], matrix[o][o]};
    }

    ConfusionCounts& operator+=(const ConfusionCounts& other) {
        for (std::size_t g = 0; g < kNumClasses; ++g)
            for (std::size_t p = 0; p < kNumClasses; ++p) matrix[g][p] += other.matrix[g][p];
        return *this;
    }

    bool operator==(const ConfusionCounts&) const = default;
};

inline void accumulate_confusion(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> truth,
                                 ConfusionCounts& counts) {
    if (pred.size() != truth.size())
        throw std::invalid_argument("confusion: prediction has " + std::to_string(pred.size()) +
                                    " pixels, ground truth " + std::to_string(truth.size()));
    ConfusionCounts local;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (pred[i] >= kNumClasses || truth[i] >= kNumClasses)
            throw std::out_of_range("confusion: label outside {0,1} at pixel " + std::to_string(i));
        ++local.matrix[truth[i]][pred[i]];
    }
    counts += local;
}

struct MetricsReport {
    std::array<double, kNumClasses> iou{};
    std::array<double, kNumClasses> recall{};
    std::array<double, kNumClasses> precision{};
    std::array<double, kNumClasses> f1{};
    double miou = 0;
    // moraine-class scores
    double dice = 0;
    double moraine_recall = 0;
    double moraine_precision = 0;
    // class-averaged scores
    double mrecall = 0;
    double mprecision = 0;
    double mf1 = 0;
    double pixel_accuracy = 0;
};

inline MetricsReport compute_metrics(const ConfusionCounts& counts) {
    if (counts.total() == 0) throw std::invalid_argument("compute_metrics: no pixels counted");
    auto ratio = [](std::uint64_t num, std::uint64_t den) {
        return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
    };
    MetricsReport r;
    double iou_sum = 0;
    std::size_t iou_classes = 0;
    for (std::size_t c = 0; c < kNumClasses; ++c) {
        const ClassCounts k = counts.for_class(c);
        const std::uint64_t uni = k.tp + k.fp + k.fn;
        r.iou[c] = ratio(k.tp, uni);
        r.recall[c] = ratio(k.tp, k.tp + k.fn);
        r.precision[c] = ratio(k.tp, k.tp + k.fp);
        r.f1[c] = ratio(2 * k.tp, 2 * k.tp + k.fp + k.fn);
        if (uni > 0) {
            iou_sum += r.iou[c];
            ++iou_classes;
        }
    }
    r.miou = iou_sum / static_cast<double>(iou_classes);
    r.dice = r.f1[1];
    r.moraine_recall = r.recall[1];
    r.moraine_precision = r.precision[1];
    r.mrecall = 0.5 * (r.recall[0] + r.recall[1]);
    r.mprecision = 0.5 * (r.precision[0] + r.precision[1]);
    r.mf1 = 0.5 * (r.f1[0] + r.f1[1]);
    r.pixel_accuracy = ratio(counts.matrix[0][0] + counts.matrix[1][1], counts.total());
    return r;
}

}  // namespace mcdnet
