#pragma once

// Training loop: weighted cross-entropy, AdamW under a per-epoch cosine
// schedule, validation mIoU each epoch, early stopping and best-checkpoint
// selection.

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mcdnet/checkpoint.hpp"
#include "mcdnet/data.hpp"
#include "mcdnet/evaluate.hpp"
#include "mcdnet/ops/loss.hpp"
#include "mcdnet/optim.hpp"

namespace mcdnet {

struct TrainConfig {
    double lr0 = 1e-4;
    double weight_decay = 1e-4;
    std::size_t batch_size = 16;
    std::size_t max_epochs = 200;
    std::size_t patience = 15;
    std::array<double, 2> class_weights{0.5, 0.5};
    double lr_min = 0.0;
    // 0 validates on the training set itself
    double val_fraction = 0.1;
    std::uint64_t seed = 0;
    std::array<double, 2> betas{0.9, 0.999};
    double adam_eps = 1e-8;
    bool augment = true;
    AugmentConfig augmentation;

    void validate() const {
        auto fail = [](const std::string& m) { throw std::invalid_argument("train config: " + m); };
        if (!(lr0 > 0)) fail("lr0 must be positive");
        if (weight_decay < 0) fail("weight_decay must be non-negative");
        if (batch_size == 0) fail("batch_size must be positive");
        if (max_epochs == 0) fail("max_epochs must be positive");
        if (patience == 0 || patience > max_epochs) fail("patience must lie in [1, max_epochs]");
        if (class_weights[0] < 0 || class_weights[1] < 0 || class_weights[0] + class_weights[1] <= 0)
            fail("class_weights must be non-negative and not both zero");
        if (lr_min < 0 || lr_min > lr0) fail("lr_min must lie in [0, lr0]");
        if (val_fraction < 0 || val_fraction >= 1) fail("val_fraction must lie in [0, 1)");
        if (betas[0] < 0 || betas[0] >= 1 || betas[1] < 0 || betas[1] >= 1) fail("betas must lie in [0, 1)");
        if (!(adam_eps > 0)) fail("adam_eps must be positive");
        augmentation.validate();
    }
};

struct EpochRecord {
    std::size_t epoch = 0;  // 1-based
    double loss = 0;
    double val_miou = 0;
    double lr = 0;
};

struct TrainHistory {
    std::vector<EpochRecord> epochs;

    std::string to_csv() const {
        std::string out = "epoch,loss,val_miou,lr\n";
        char buf[128];
        for (const auto& e : epochs) {
            std::snprintf(buf, sizeof buf, "%zu,%.10g,%.10g,%.10g\n", e.epoch, e.loss, e.val_miou, e.lr);
            out += buf;
        }
        return out;
    }

    void write_csv(const std::filesystem::path& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw IoError("cannot write " + path.string());
        out << to_csv();
    }
};

struct TrainResult {
    Checkpoint best;
    TrainHistory history;
    std::size_t steps = 0;
};

struct TrainHooks {
    // Replaces the validation mIoU computation; receives the 1-based epoch.
    std::function<double(std::size_t)> validator;
    // Called after every epoch.
    std::function<void(const EpochRecord&)> on_epoch;
    // Optional cap on optimizer steps; training stops once it is reached.
    std::size_t max_steps = 0;
};

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a * 0x9E3779B97F4A7C15ULL + b + 0x632BE59BD9B4E019ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Carves the validation split off `data`; returns {train, val}.
inline std::pair<std::vector<Sample>, std::vector<Sample>> carve_validation(const std::vector<Sample>& data,
                                                                            double fraction, std::uint64_t seed) {
    if (fraction <= 0.0) return {data, data};
    const std::size_t n_val = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(static_cast<double>(data.size()) * fraction)));
    if (n_val >= data.size()) throw DataError("validation carve-out leaves no training samples");
    std::vector<std::size_t> order(data.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::mt19937_64 rng(mix_seed(seed, 0x7661));
    std::shuffle(order.begin(), order.end(), rng);
    std::pair<std::vector<Sample>, std::vector<Sample>> out;
    for (std::size_t i = 0; i < order.size(); ++i) (i < n_val ? out.second : out.first).push_back(data[order[i]]);
    return out;
}

/// Weighted cross-entropy over a batch.
template <typename T>
Tensor<T> segmentation_loss(const Tensor<T>& logits, const std::vector<std::uint8_t>& mask,
                            const std::array<double, 2>& class_weights) {
    return softmax_ce(logits, std::span<const std::uint8_t>(mask), std::span<const double>(class_weights));
}

/// Trains `model` in place. On return the model holds the best-validation
/// weights, which are also returned as a checkpoint.
template <typename T>
TrainResult train_loop(McdNet<T>& model, const std::vector<Sample>& data, const TrainConfig& cfg,
                       const TrainHooks& hooks = {}) {
    cfg.validate();
    if (data.empty()) throw DataError("train: empty training set");
    for (const auto& s : data) validate_sample(s);
    auto [train, val] = carve_validation(data, cfg.val_fraction, cfg.seed);

    auto params = param_tensors(model.registry());
    AdamWState<T> opt;
    const AdamWConfig adam{cfg.weight_decay, cfg.betas[0], cfg.betas[1], cfg.adam_eps};

    TrainResult result;
    double best = -1.0;
    std::size_t stagnant = 0;
    std::vector<std::size_t> order(train.size());
    bool out_of_steps = false;

    for (std::size_t epoch = 0; epoch < cfg.max_epochs && !out_of_steps; ++epoch) {
        const double lr = cosine_lr(static_cast<double>(epoch), static_cast<double>(cfg.max_epochs), cfg.lr0, cfg.lr_min);
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::mt19937_64 shuffle_rng(mix_seed(cfg.seed, epoch + 1));
        std::shuffle(order.begin(), order.end(), shuffle_rng);

        model.set_mode(NormMode::training);
        double loss_sum = 0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            std::vector<Sample> augmented;
            std::vector<const Sample*> batch;
            const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
            augmented.reserve(stop - start);
            for (std::size_t i = start; i < stop; ++i) {
                const Sample& s = train[order[i]];
                if (cfg.augment)
                    augmented.push_back(augment(s, cfg.augmentation, mix_seed(mix_seed(cfg.seed, epoch + 1), order[i])));
                else
                    augmented.push_back(s);
            }
            for (const auto& s : augmented) batch.push_back(&s);
            auto [images, labels] = make_batch<T>(batch);

            model.registry().zero_grad();
            auto loss = segmentation_loss(model.forward(images), labels, cfg.class_weights);
            const double value = static_cast<double>(loss.item());
            if (!std::isfinite(value))
                throw NumericError("training diverged: non-finite loss at epoch " + std::to_string(epoch + 1));
            loss.backward();
            adamw_step(params, opt, lr, adam);
            loss_sum += value;
            ++batches;
            ++result.steps;
            if (hooks.max_steps && result.steps >= hooks.max_steps) {
                out_of_steps = true;
                break;
            }
        }
        model.registry().zero_grad();

        EpochRecord rec;
        rec.epoch = epoch + 1;
        rec.loss = loss_sum / static_cast<double>(batches);
        rec.lr = lr;
        rec.val_miou = hooks.validator ? hooks.validator(rec.epoch) : evaluate(model, val, cfg.batch_size).miou;
        result.history.epochs.push_back(rec);
        if (hooks.on_epoch) hooks.on_epoch(rec);

        if (best < 0 || rec.val_miou >= best + 1e-6) {
            best = rec.val_miou;
            stagnant = 0;
            result.best = capture(model, rec.epoch, best);
        } else if (++stagnant >= cfg.patience) {
            break;
        }
    }
    restore(model, result.best);
    model.set_mode(NormMode::inference);
    return result;
}

}  // namespace mcdnet
