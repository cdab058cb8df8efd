#pragma once

// Checkpoint container:
//
//   "MCDN" | u32 version | u64 index bytes | JSON index | payloads
//
// The index carries the model config, epoch, best validation mIoU and one
// {name, dtype, shape, offset, length} entry per tensor; offsets are relative
// to the start of the payload block. Payloads are little-endian IEEE-754.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mcdnet/image.hpp"
#include "mcdnet/model.hpp"

namespace mcdnet {

static_assert(std::endian::native == std::endian::little, "checkpoint payloads assume a little-endian host");

inline constexpr char kCheckpointMagic[4] = {'M', 'C', 'D', 'N'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TensorBlob {
    std::string name;
    std::string dtype;  // "f32" or "f64"
    Shape shape;
    std::vector<std::uint8_t> bytes;

    bool operator==(const TensorBlob&) const = default;
};

struct Checkpoint {
    nlohmann::json config;
    std::uint64_t epoch = 0;
    double best_val_miou = 0;
    std::vector<TensorBlob> tensors;
};

template <typename T>
constexpr const char* dtype_name() {
    static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);
    return std::is_same_v<T, float> ? "f32" : "f64";
}

inline std::size_t dtype_size(const std::string& dtype) {
    if (dtype == "f32") return 4;
    if (dtype == "f64") return 8;
    throw CheckpointError("unknown dtype '" + dtype + "'");
}

template <typename T>
TensorBlob to_blob(const std::string& name, const Tensor<T>& t) {
    TensorBlob b{name, dtype_name<T>(), t.shape(), std::vector<std::uint8_t>(t.numel() * sizeof(T))};
    std::memcpy(b.bytes.data(), t.data().data(), b.bytes.size());
    return b;
}

template <typename T>
std::vector<T> blob_values(const TensorBlob& b) {
    const std::size_t n = numel(b.shape);
    if (b.bytes.size() != n * dtype_size(b.dtype)) throw CheckpointError(b.name + ": payload size disagrees with shape");
    std::vector<T> out(n);
    if (b.dtype == "f32") {
        std::vector<float> tmp(n);
        std::memcpy(tmp.data(), b.bytes.data(), b.bytes.size());
        std::copy(tmp.begin(), tmp.end(), out.begin());
    } else {
        std::vector<double> tmp(n);
        std::memcpy(tmp.data(), b.bytes.data(), b.bytes.size());
        std::transform(tmp.begin(), tmp.end(), out.begin(), [](double v) { return static_cast<T>(v); });
    }
    return out;
}

/// Snapshot of every parameter and running statistic.
template <typename T>
Checkpoint capture(const McdNet<T>& model, std::uint64_t epoch = 0, double best_val_miou = 0) {
    Checkpoint c;
    c.config = model.config();
    c.epoch = epoch;
    c.best_val_miou = best_val_miou;
    for (const auto& p : model.registry().params()) c.tensors.push_back(to_blob(p.name, p.tensor));
    for (const auto& b : model.registry().buffers()) c.tensors.push_back(to_blob(b.name, b.tensor));
    return c;
}

/// Copies checkpoint values into the model. Any name or shape disagreement is
/// reported in full before anything is modified.
template <typename T>
void restore(McdNet<T>& model, const Checkpoint& ckpt) {
    std::map<std::string, const TensorBlob*> blobs;
    for (const auto& b : ckpt.tensors) blobs[b.name] = &b;
    std::vector<NamedTensor<T>> targets = model.registry().params();
    const auto& bufs = model.registry().buffers();
    targets.insert(targets.end(), bufs.begin(), bufs.end());

    std::vector<std::string> missing, mismatched;
    std::set<std::string> known;
    for (const auto& t : targets) {
        known.insert(t.name);
        const auto it = blobs.find(t.name);
        if (it == blobs.end()) missing.push_back(t.name);
        else if (it->second->shape != t.tensor.shape())
            mismatched.push_back(t.name + " " + to_string(it->second->shape) + " vs model " + to_string(t.tensor.shape()));
    }
    std::vector<std::string> unexpected;
    for (const auto& b : ckpt.tensors)
        if (!known.count(b.name)) unexpected.push_back(b.name);
    if (!missing.empty() || !unexpected.empty() || !mismatched.empty()) {
        std::string msg = "checkpoint does not match model:";
        auto list = [&](const char* label, const std::vector<std::string>& names) {
            if (names.empty()) return;
            msg += std::string("\n  ") + label + " (" + std::to_string(names.size()) + "):";
            for (const auto& n : names) msg += "\n    " + n;
        };
        list("missing", missing);
        list("unexpected", unexpected);
        list("shape mismatch", mismatched);
        throw CheckpointError(msg);
    }
    for (auto& t : targets) {
        const auto values = blob_values<T>(*blobs.at(t.name));
        auto dst = t.tensor.mutable_data();
        std::copy(values.begin(), values.end(), dst.begin());
    }
}

inline void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    nlohmann::json index;
    index["config"] = ckpt.config;
    index["epoch"] = ckpt.epoch;
    index["best_val_miou"] = ckpt.best_val_miou;
    index["tensors"] = nlohmann::json::array();
    std::uint64_t offset = 0;
    for (const auto& t : ckpt.tensors) {
        index["tensors"].push_back(
            {{"name", t.name}, {"dtype", t.dtype}, {"shape", t.shape}, {"offset", offset}, {"length", t.bytes.size()}});
        offset += t.bytes.size();
    }
    const std::string text = index.dump();
    if (!path.parent_path().empty()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint " + path.string());
    const std::uint32_t version = kCheckpointVersion;
    const std::uint64_t index_len = text.size();
    out.write(kCheckpointMagic, 4);
    out.write(reinterpret_cast<const char*>(&version), sizeof version);
    out.write(reinterpret_cast<const char*>(&index_len), sizeof index_len);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& t : ckpt.tensors)
        out.write(reinterpret_cast<const char*>(t.bytes.data()), static_cast<std::streamsize>(t.bytes.size()));
    if (!out) throw IoError("failed writing checkpoint " + path.string());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint " + path.string());
    const std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    constexpr std::size_t header = 4 + sizeof(std::uint32_t) + sizeof(std::uint64_t);
    if (raw.size() < header || std::memcmp(raw.data(), kCheckpointMagic, 4) != 0)
        throw CheckpointError(path.string() + ": bad magic, not a checkpoint");
    std::uint32_t version = 0;
    std::uint64_t index_len = 0;
    std::memcpy(&version, raw.data() + 4, sizeof version);
    std::memcpy(&index_len, raw.data() + 8, sizeof index_len);
    if (version != kCheckpointVersion) throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
    if (index_len > raw.size() - header) throw CheckpointError(path.string() + ": truncated index");

    nlohmann::json index;
    try {
        index = nlohmann::json::parse(raw.begin() + static_cast<std::ptrdiff_t>(header),
                                      raw.begin() + static_cast<std::ptrdiff_t>(header + index_len));
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError(path.string() + ": malformed index: " + e.what());
    }
    const std::size_t payload = header + index_len;
    const std::size_t available = raw.size() - payload;

    Checkpoint c;
    try {
        c.config = index.at("config");
        c.epoch = index.at("epoch").get<std::uint64_t>();
        c.best_val_miou = index.at("best_val_miou").get<double>();
        for (const auto& e : index.at("tensors")) {
            TensorBlob b;
            b.name = e.at("name").get<std::string>();
            b.dtype = e.at("dtype").get<std::string>();
            b.shape = e.at("shape").get<Shape>();
            const auto offset = e.at("offset").get<std::uint64_t>();
            const auto length = e.at("length").get<std::uint64_t>();
            if (offset > available || length > available - offset)
                throw CheckpointError(b.name + ": payload truncated (needs bytes " + std::to_string(offset) + "+" +
                                      std::to_string(length) + ", file holds " + std::to_string(available) + ")");
            if (length != numel(b.shape) * dtype_size(b.dtype))
                throw CheckpointError(b.name + ": index length " + std::to_string(length) + " disagrees with shape " +
                                      to_string(b.shape) + "; payload truncated or corrupt");
            const auto* p = reinterpret_cast<const std::uint8_t*>(raw.data() + payload + offset);
            b.bytes.assign(p, p + length);
            c.tensors.push_back(std::move(b));
        }
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError(path.string() + ": malformed index: " + e.what());
    }
    return c;
}

/// Builds a model from the checkpoint's own config and loads its weights.
template <typename T>
McdNet<T> model_from_checkpoint(const Checkpoint& ckpt) {
    McdNet<T> model(ckpt.config.get<ModelConfig>());
    restore(model, ckpt);
    return model;
}

}  // namespace mcdnet
