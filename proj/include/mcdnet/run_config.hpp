#pragma once

// Sectioned key/value run configuration (INI), shared by the CLI commands.
//
//   [run]     seed, out_dir
//   [data]    manifest, holdout
//   [model]   channel_scale, width, use_cbam, output_stride, aspp_rates, ...
//   [train]   lr0, weight_decay, batch_size, max_epochs, patience, ...
//   [augment] scale_min, scale_max, hflip_p, vflip_p, rotation_deg, ...
//   [regions] region1, region2 = name,lon_min,lon_max,lat_min,lat_max
//
// Unknown sections or keys are rejected. Relative paths resolve against the
// config file's directory.

#include <filesystem>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "mcdnet/data.hpp"
#include "mcdnet/model.hpp"
#include "mcdnet/train.hpp"

namespace mcdnet {

struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct RunConfig {
    std::uint64_t seed = 0;
    std::filesystem::path out_dir = "out";
    std::filesystem::path manifest;
    // hold out a seeded 1/10 test split before training
    bool holdout = true;
    ModelConfig model;
    TrainConfig train;
    std::size_t max_steps = 0;
    std::vector<RegionBox> regions = default_regions();
};

namespace detail {

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto b = item.find_first_not_of(" \t"), e = item.find_last_not_of(" \t");
        out.push_back(b == std::string::npos ? "" : item.substr(b, e - b + 1));
    }
    return out;
}

template <typename V>
V parse_value(const std::string& key, const std::string& text) {
    std::istringstream is(text);
    V v{};
    if constexpr (std::is_same_v<V, bool>) {
        if (text == "true" || text == "1") return true;
        if (text == "false" || text == "0") return false;
        throw ConfigError("key '" + key + "': expected true/false, got '" + text + "'");
    } else {
        is >> v;
        if (!is || !is.eof()) throw ConfigError("key '" + key + "': cannot parse '" + text + "'");
        if constexpr (std::is_unsigned_v<V>)
            if (text.find('-') != std::string::npos) throw ConfigError("key '" + key + "': must be non-negative");
    }
    return v;
}

template <typename V, std::size_t N>
std::array<V, N> parse_array(const std::string& key, const std::string& text) {
    const auto parts = split_list(text);
    if (parts.size() != N) throw ConfigError("key '" + key + "': expected " + std::to_string(N) + " comma-separated values");
    std::array<V, N> out{};
    for (std::size_t i = 0; i < N; ++i) out[i] = parse_value<V>(key, parts[i]);
    return out;
}

inline RegionBox parse_region(const std::string& key, const std::string& text) {
    const auto parts = split_list(text);
    if (parts.size() != 5) throw ConfigError("key '" + key + "': expected name,lon_min,lon_max,lat_min,lat_max");
    RegionBox r{parts[0], parse_value<double>(key, parts[1]), parse_value<double>(key, parts[2]),
                parse_value<double>(key, parts[3]), parse_value<double>(key, parts[4])};
    try {
        r.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return r;
}

template <typename A>
std::string join(const A& values) {
    std::ostringstream os;
    os.precision(17);
    bool first = true;
    for (const auto& v : values) {
        os << (first ? "" : ",") << v;
        first = false;
    }
    return os.str();
}

inline std::string num(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace detail

/// Flattens a config into section → key → text; the inverse of apply_entries.
inline std::map<std::string, std::map<std::string, std::string>> config_entries(const RunConfig& c) {
    using detail::num;
    const auto& m = c.model;
    const auto& t = c.train;
    const auto& a = c.train.augmentation;
    std::map<std::string, std::map<std::string, std::string>> e;
    e["run"] = {{"seed", std::to_string(c.seed)}, {"out_dir", c.out_dir.string()}};
    e["data"] = {{"manifest", c.manifest.string()}, {"holdout", c.holdout ? "true" : "false"}};
    e["model"] = {{"backbone", m.backbone},
                  {"width", num(m.width)},
                  {"use_cbam", m.use_cbam ? "true" : "false"},
                  {"num_classes", std::to_string(m.num_classes)},
                  {"output_stride", std::to_string(m.output_stride)},
                  {"aspp_rates", detail::join(m.aspp_rates)},
                  {"aspp_channels", std::to_string(m.aspp_channels)},
                  {"decoder_lowlevel_channels", std::to_string(m.decoder_lowlevel_channels)},
                  {"channel_scale", num(m.channel_scale)},
                  {"cbam_reduction", std::to_string(m.cbam_reduction)},
                  {"cbam_kernel", std::to_string(m.cbam_kernel)}};
    e["train"] = {{"lr0", num(t.lr0)},
                  {"weight_decay", num(t.weight_decay)},
                  {"batch_size", std::to_string(t.batch_size)},
                  {"max_epochs", std::to_string(t.max_epochs)},
                  {"patience", std::to_string(t.patience)},
                  {"class_weights", detail::join(t.class_weights)},
                  {"lr_min", num(t.lr_min)},
                  {"val_fraction", num(t.val_fraction)},
                  {"betas", detail::join(t.betas)},
                  {"adam_eps", num(t.adam_eps)},
                  {"augment", t.augment ? "true" : "false"},
                  {"max_steps", std::to_string(c.max_steps)}};
    e["augment"] = {{"scale_min", num(a.scale_range.first)},
                    {"scale_max", num(a.scale_range.second)},
                    {"hflip_p", num(a.hflip_p)},
                    {"vflip_p", num(a.vflip_p)},
                    {"rotation_deg", num(a.rotation_deg)},
                    {"blur_p", num(a.blur_p)},
                    {"blur_sigma_min", num(a.blur_sigma_range.first)},
                    {"blur_sigma_max", num(a.blur_sigma_range.second)},
                    {"crop", std::to_string(a.out_h)}};
    for (std::size_t i = 0; i < c.regions.size(); ++i) {
        const auto& r = c.regions[i];
        e["regions"]["region" + std::to_string(i + 1)] =
            r.name + "," + num(r.lon_min) + "," + num(r.lon_max) + "," + num(r.lat_min) + "," + num(r.lat_max);
    }
    return e;
}

inline void apply_entry(RunConfig& c, const std::string& section, const std::string& key, const std::string& v) {
    using detail::parse_value;
    const std::string k = section + "." + key;
    auto& m = c.model;
    auto& t = c.train;
    auto& a = c.train.augmentation;
    if (section == "run") {
        if (key == "seed") return void(c.seed = parse_value<std::uint64_t>(k, v));
        if (key == "out_dir") return void(c.out_dir = v);
    } else if (section == "data") {
        if (key == "manifest") return void(c.manifest = v);
        if (key == "holdout") return void(c.holdout = parse_value<bool>(k, v));
    } else if (section == "model") {
        if (key == "backbone") return void(m.backbone = v);
        if (key == "width") return void(m.width = parse_value<double>(k, v));
        if (key == "use_cbam") return void(m.use_cbam = parse_value<bool>(k, v));
        if (key == "num_classes") return void(m.num_classes = parse_value<int>(k, v));
        if (key == "output_stride") return void(m.output_stride = parse_value<int>(k, v));
        if (key == "aspp_rates") return void(m.aspp_rates = detail::parse_array<int, 3>(k, v));
        if (key == "aspp_channels") return void(m.aspp_channels = parse_value<int>(k, v));
        if (key == "decoder_lowlevel_channels") return void(m.decoder_lowlevel_channels = parse_value<int>(k, v));
        if (key == "channel_scale") return void(m.channel_scale = parse_value<double>(k, v));
        if (key == "cbam_reduction") return void(m.cbam_reduction = parse_value<int>(k, v));
        if (key == "cbam_kernel") return void(m.cbam_kernel = parse_value<int>(k, v));
    } else if (section == "train") {
        if (key == "lr0") return void(t.lr0 = parse_value<double>(k, v));
        if (key == "weight_decay") return void(t.weight_decay = parse_value<double>(k, v));
        if (key == "batch_size") return void(t.batch_size = parse_value<std::size_t>(k, v));
        if (key == "max_epochs") return void(t.max_epochs = parse_value<std::size_t>(k, v));
        if (key == "patience") return void(t.patience = parse_value<std::size_t>(k, v));
        if (key == "class_weights") return void(t.class_weights = detail::parse_array<double, 2>(k, v));
        if (key == "lr_min") return void(t.lr_min = parse_value<double>(k, v));
        if (key == "val_fraction") return void(t.val_fraction = parse_value<double>(k, v));
        if (key == "betas") return void(t.betas = detail::parse_array<double, 2>(k, v));
        if (key == "adam_eps") return void(t.adam_eps = parse_value<double>(k, v));
        if (key == "augment") return void(t.augment = parse_value<bool>(k, v));
        if (key == "max_steps") return void(c.max_steps = parse_value<std::size_t>(k, v));
    } else if (section == "augment") {
        if (key == "scale_min") return void(a.scale_range.first = parse_value<double>(k, v));
        if (key == "scale_max") return void(a.scale_range.second = parse_value<double>(k, v));
        if (key == "hflip_p") return void(a.hflip_p = parse_value<double>(k, v));
        if (key == "vflip_p") return void(a.vflip_p = parse_value<double>(k, v));
        if (key == "rotation_deg") return void(a.rotation_deg = parse_value<double>(k, v));
        if (key == "blur_p") return void(a.blur_p = parse_value<double>(k, v));
        if (key == "blur_sigma_min") return void(a.blur_sigma_range.first = parse_value<double>(k, v));
        if (key == "blur_sigma_max") return void(a.blur_sigma_range.second = parse_value<double>(k, v));
        if (key == "crop") {
            a.out_h = a.out_w = parse_value<std::size_t>(k, v);
            return;
        }
    } else if (section == "regions") {
        if (key == "region1" || key == "region2") {
            const std::size_t i = key == "region1" ? 0 : 1;
            c.regions.at(i) = detail::parse_region(k, v);
            return;
        }
    } else {
        throw ConfigError("unknown section [" + section + "]");
    }
    throw ConfigError("unknown key '" + key + "' in section [" + section + "]");
}

inline void validate(const RunConfig& c) {
    try {
        c.model.validate();
        c.train.validate();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if (c.regions.size() != 2) throw ConfigError("exactly two regions are required");
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw ConfigError("config file not found: " + path.string());
    boost::property_tree::ptree tree;
    try {
        boost::property_tree::read_ini(path.string(), tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError(std::string("malformed config: ") + e.what());
    }
    RunConfig c;
    for (const auto& [section, body] : tree) {
        if (body.empty()) throw ConfigError("key '" + section + "' outside any section");
        for (const auto& [key, value] : body) apply_entry(c, section, key, value.data());
    }
    c.model.seed = c.seed;
    c.train.seed = c.seed;
    const auto base = std::filesystem::absolute(path).parent_path();
    auto resolve = [&](std::filesystem::path& p) {
        if (!p.empty() && p.is_relative()) p = (base / p).lexically_normal();
    };
    resolve(c.out_dir);
    resolve(c.manifest);
    validate(c);
    return c;
}

/// Writes the fully resolved configuration (defaults included).
inline void write_run_config(const RunConfig& c, const std::filesystem::path& path) {
    boost::property_tree::ptree tree;
    for (const auto& [section, keys] : config_entries(c))
        for (const auto& [key, value] : keys) tree.put(boost::property_tree::ptree::path_type(section + "/" + key, '/'), value);
    boost::property_tree::write_ini(path.string(), tree);
}

}  // namespace mcdnet
