#pragma once

// Bidirectional cross-region evaluation and report tables.

#include <cstdio>
#include <string>
#include <vector>

#include "mcdnet/data.hpp"
#include "mcdnet/evaluate.hpp"
#include "mcdnet/train.hpp"

namespace mcdnet {

struct CrossRegionRow {
    std::string train_region, test_region;
    MetricsReport metrics;
    // within-region mIoU minus this row's mIoU; positive means a drop
    double delta_miou = 0;
};

/// Splits each region 9:1, trains one model per region on its training part
/// and tests it on both regions' held-out parts. Row order: (A,A), (A,B),
/// (B,B), (B,A).
template <typename T>
std::vector<CrossRegionRow> cross_region_eval(const ModelConfig& model_cfg, const TrainConfig& train_cfg,
                                              const std::vector<Sample>& samples, const std::vector<RegionBox>& regions,
                                              const TrainHooks& hooks = {}) {
    if (regions.size() != 2) throw std::invalid_argument("cross-region evaluation needs exactly two regions");
    const RegionPartition part = region_split(samples, regions);
    std::vector<std::pair<std::vector<Sample>, std::vector<Sample>>> splits;
    for (const auto& r : regions) {
        const auto& members = part.by_region.at(r.name);
        if (members.size() < 2)
            throw DataError("region " + r.name + " holds " + std::to_string(members.size()) + " samples; need at least 2");
        splits.push_back(random_split(members, train_cfg.seed));
    }
    std::vector<CrossRegionRow> rows;
    for (std::size_t i = 0; i < 2; ++i) {
        McdNet<T> model(model_cfg);
        train_loop(model, splits[i].first, train_cfg, hooks);
        const MetricsReport within = evaluate(model, splits[i].second, train_cfg.batch_size);
        const MetricsReport cross = evaluate(model, splits[1 - i].second, train_cfg.batch_size);
        rows.push_back({regions[i].name, regions[i].name, within, 0.0});
        rows.push_back({regions[i].name, regions[1 - i].name, cross, within.miou - cross.miou});
    }
    return rows;
}

inline constexpr const char* kMetricsCsvHeader =
    "model,params,macs,flops,miou,recall,precision,dice,pixel_acc,mrecall,mprecision,mf1";

/// One model-comparison row; recall/precision are moraine-class, m* are
/// class-averaged.
inline std::string metrics_csv_row(const std::string& model, std::uint64_t params, std::uint64_t macs,
                                   const MetricsReport& m) {
    char buf[512];
    std::snprintf(buf, sizeof buf, "%s,%llu,%llu,%llu,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f", model.c_str(),
                  static_cast<unsigned long long>(params), static_cast<unsigned long long>(macs),
                  static_cast<unsigned long long>(2 * macs), m.miou, m.moraine_recall, m.moraine_precision, m.dice,
                  m.pixel_accuracy, m.mrecall, m.mprecision, m.mf1);
    return buf;
}

inline constexpr const char* kCrossRegionCsvHeader = "train_region,test_region,miou,mrecall,mprecision,mf1,acc,delta_miou";

inline std::string cross_region_csv(const std::vector<CrossRegionRow>& rows) {
    std::string out = std::string(kCrossRegionCsvHeader) + "\n";
    char buf[512];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%s,%s,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n", r.train_region.c_str(),
                      r.test_region.c_str(), r.metrics.miou, r.metrics.mrecall, r.metrics.mprecision, r.metrics.mf1,
                      r.metrics.pixel_accuracy, r.delta_miou);
        out += buf;
    }
    return out;
}

}  // namespace mcdnet
