// mcdnet command-line driver.
//
// Exit codes: 0 success, 2 usage or config error, 1 runtime error.
// Diagnostics go to stderr as "error: <category>: <message>".

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mcdnet/mcdnet.hpp"

namespace fs = std::filesystem;
using namespace mcdnet;

namespace {

struct UsageError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("failed writing " + path.string());
}

fs::path prepare_out(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
    return dir;
}

struct Splits {
    std::vector<Sample> train, test;
};

Splits load_splits(const RunConfig& cfg) {
    if (cfg.manifest.empty()) throw ConfigError("[data] manifest is required");
    auto all = load_dataset(cfg.manifest);
    if (all.empty()) throw DataError("manifest lists no samples");
    if (!cfg.holdout) return {std::move(all), {}};
    auto [train, test] = random_split(all, cfg.seed);
    return {std::move(train), std::move(test)};
}

std::vector<Sample> select_split(const RunConfig& cfg, const std::string& split) {
    if (split == "all") return load_dataset(cfg.manifest);
    auto s = load_splits(cfg);
    if (split == "train") return s.train;
    if (split == "val") return carve_validation(s.train, cfg.train.val_fraction, cfg.seed).second;
    if (s.test.empty()) throw ConfigError("split 'test' needs [data] holdout = true");
    return s.test;
}

Tensor<float> image_tensor(const Image& im) {
    return Tensor<float>::from({1, 3, im.height, im.width}, im.data);
}

std::string summary_line(const char* what, const MetricsReport& m) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%s: miou %.4f dice %.4f recall %.4f precision %.4f pixel_acc %.4f", what, m.miou,
                  m.dice, m.moraine_recall, m.moraine_precision, m.pixel_accuracy);
    return buf;
}

// ------------------------------------------------------------------ commands

struct SynthArgs {
    std::size_t n = 16, size = 64;
    double fraction = 0.10, spread = 0.05, region2_brightness = 0.0;
    std::uint64_t seed = 0;
    std::string out;
};

int cmd_synth(const SynthArgs& a) {
    SyntheticOptions o;
    o.n = a.n;
    o.size = a.size;
    o.fraction_lo = std::max(0.0, a.fraction - a.spread);
    o.fraction_hi = std::min(1.0, a.fraction + a.spread);
    o.seed = a.seed;
    o.region2_brightness = a.region2_brightness;
    if (a.size % 16 != 0) throw UsageError("--size must be a multiple of 16");
    const auto samples = generate_synthetic(o);
    const fs::path dir = prepare_out(a.out);
    const auto manifest = write_dataset(samples, dir);
    std::cout << "wrote " << samples.size() << " samples to " << manifest.string() << '\n';
    return 0;
}

int cmd_stats(const std::string& manifest, const std::string& out, std::size_t bins) {
    const auto samples = load_dataset(manifest);
    const auto st = compute_stats(samples, bins);
    const fs::path dir = prepare_out(out);
    char buf[256];
    std::string csv = "class,pixels,proportion\n";
    const char* names[2] = {"background", "moraine"};
    for (std::size_t c = 0; c < 2; ++c) {
        std::snprintf(buf, sizeof buf, "%s,%llu,%.6f\n", names[c], static_cast<unsigned long long>(st.class_pixels[c]),
                      st.proportions[c]);
        csv += buf;
    }
    write_text(dir / "stats.csv", csv);
    svg::write(dir / "pixel_distribution.svg",
               svg::bar_chart("Pixel distribution", {{"background", st.proportions[0]}, {"moraine", st.proportions[1]}},
                              "proportion", 1.0));
    svg::write(dir / "area_histogram.svg", svg::histogram("Moraine area per image", st.histogram, 0.0, 1.0, "moraine fraction"));
    std::cout << csv;
    return 0;
}

int cmd_train(const std::string& config_path) {
    const RunConfig cfg = load_run_config(config_path);
    const fs::path dir = prepare_out(cfg.out_dir);
    write_run_config(cfg, dir / "resolved_config.ini");
    const Splits s = load_splits(cfg);

    McdNet<float> model(cfg.model);
    TrainHooks hooks;
    hooks.max_steps = cfg.max_steps;
    hooks.on_epoch = [](const EpochRecord& e) {
        std::fprintf(stderr, "epoch %zu loss %.6f val_miou %.4f lr %.3g\n", e.epoch, e.loss, e.val_miou, e.lr);
    };
    const TrainResult r = train_loop(model, s.train, cfg.train, hooks);

    save_checkpoint(r.best, dir / "checkpoint.mcdn");
    r.history.write_csv(dir / "history.csv");
    std::vector<double> loss, lr, miou;
    for (const auto& e : r.history.epochs) {
        loss.push_back(e.loss);
        lr.push_back(e.lr);
        miou.push_back(e.val_miou);
    }
    svg::write(dir / "loss.svg", svg::line_chart("Training loss", loss, "epoch", "loss"));
    svg::write(dir / "lr.svg", svg::line_chart("Learning rate", lr, "epoch", "lr"));
    svg::write(dir / "val_miou.svg", svg::line_chart("Validation mIoU", miou, "epoch", "mIoU"));

    const MetricsReport train_m = evaluate(model, s.train, cfg.train.batch_size);
    std::string csv = std::string(kMetricsCsvHeader) + "\n";
    const std::string name = cfg.model.use_cbam ? "mcdnet" : "mcdnet_plain";
    const auto cost = complexity(model, s.train.front().image.height, s.train.front().image.width);
    csv += metrics_csv_row(name + "_train", cost.params, cost.macs, train_m) + "\n";
    std::cout << summary_line("train", train_m) << '\n';
    if (!s.test.empty()) {
        const MetricsReport test_m = evaluate(model, s.test, cfg.train.batch_size);
        csv += metrics_csv_row(name + "_test", cost.params, cost.macs, test_m) + "\n";
        std::cout << summary_line("test", test_m) << '\n';
    }
    write_text(dir / "metrics.csv", csv);
    std::printf("best epoch %llu val_miou %.6f steps %zu\n", static_cast<unsigned long long>(r.best.epoch),
                r.best.best_val_miou, r.steps);
    return 0;
}

int cmd_eval(const std::string& config_path, const std::string& checkpoint, const std::string& split,
             const std::string& out) {
    const RunConfig cfg = load_run_config(config_path);
    if (!fs::exists(checkpoint)) throw IoError("checkpoint not found: " + checkpoint);
    const fs::path dir = prepare_out(out.empty() ? cfg.out_dir : fs::path(out));
    write_run_config(cfg, dir / "resolved_config.ini");
    McdNet<float> model = model_from_checkpoint<float>(load_checkpoint(checkpoint));
    const auto samples = select_split(cfg, split);
    const MetricsReport m = evaluate(model, samples, cfg.train.batch_size);
    const auto cost = complexity(model, samples.front().image.height, samples.front().image.width);
    const std::string row = metrics_csv_row(split, cost.params, cost.macs, m);
    write_text(dir / ("metrics_" + split + ".csv"), std::string(kMetricsCsvHeader) + "\n" + row + "\n");
    std::cout << kMetricsCsvHeader << '\n' << row << '\n';
    return 0;
}

int cmd_xregion(const std::string& config_path) {
    const RunConfig cfg = load_run_config(config_path);
    const fs::path dir = prepare_out(cfg.out_dir);
    write_run_config(cfg, dir / "resolved_config.ini");
    if (cfg.manifest.empty()) throw ConfigError("[data] manifest is required");
    const auto samples = load_dataset(cfg.manifest);
    TrainHooks hooks;
    hooks.max_steps = cfg.max_steps;
    const auto rows = cross_region_eval<float>(cfg.model, cfg.train, samples, cfg.regions, hooks);
    const std::string csv = cross_region_csv(rows);
    write_text(dir / "xregion.csv", csv);
    std::cout << csv;
    return 0;
}

int cmd_infer(const std::string& checkpoint, const std::string& image_path, const std::string& out) {
    if (!fs::exists(checkpoint)) throw IoError("checkpoint not found: " + checkpoint);
    McdNet<float> model = model_from_checkpoint<float>(load_checkpoint(checkpoint));
    const Image im = load_image(image_path);
    model.set_mode(NormMode::inference);
    std::vector<std::uint8_t> pred;
    {
        NoGradGuard no_grad;
        pred = predict(model.forward(image_tensor(im)));
    }
    const fs::path dir = prepare_out(out);
    Mask mask(im.height, im.width);
    mask.data = pred;
    save_mask(dir / "mask.png", mask);
    Image overlay = im;
    for (std::size_t y = 0; y < im.height; ++y)
        for (std::size_t x = 0; x < im.width; ++x)
            if (mask.at(y, x)) {
                overlay.at(0, y, x) = 0.5f * overlay.at(0, y, x) + 0.5f;
                overlay.at(1, y, x) *= 0.5f;
                overlay.at(2, y, x) *= 0.5f;
            }
    save_image(dir / "overlay.png", overlay);
    std::size_t fg = 0;
    for (const auto v : pred) fg += v;
    std::printf("moraine pixels %zu of %zu\n", fg, pred.size());
    return 0;
}

int cmd_gradcam(const std::string& checkpoint, const std::string& image_path, int cls, const std::string& layer,
                const std::string& out) {
    if (!fs::exists(checkpoint)) throw IoError("checkpoint not found: " + checkpoint);
    McdNet<float> model = model_from_checkpoint<float>(load_checkpoint(checkpoint));
    const Image im = load_image(image_path);
    const CamHeatmap cam = grad_cam(model, image_tensor(im), cls, layer);
    const fs::path dir = prepare_out(out);
    Image heat(1, cam.height, cam.width);
    for (std::size_t i = 0; i < cam.values.size(); ++i) heat.data[i] = static_cast<float>(cam.values[i]);
    save_image(dir / "gradcam.png", heat);
    std::printf("layer %s class %d\n", cam.layer.c_str(), cam.target_class);
    return 0;
}

int cmd_flops(const std::string& config_path, std::size_t res, const std::string& out) {
    RunConfig cfg;
    if (!config_path.empty()) cfg = load_run_config(config_path);
    const McdNet<float> model(cfg.model);
    const ComplexityReport r = complexity(model, res, res);
    const fs::path dir = prepare_out(out.empty() ? cfg.out_dir : fs::path(out));
    write_run_config(cfg, dir / "resolved_config.ini");
    // output shapes contain commas; quote them
    std::string quoted;
    for (const auto& l : r.layers) {
        const std::string shape = to_string(l.output);
        quoted += l.name + "," + to_string(l.kind) + ",\"" + shape.substr(1, shape.size() - 2) + "\"," +
                  std::to_string(l.params) + "," + std::to_string(l.macs) + "," + (l.spatial ? "1" : "0") + "\n";
    }
    write_text(dir / ("flops_" + std::to_string(res) + ".csv"), "layer,kind,output,params,macs,spatial\n" + quoted);
    std::printf("resolution %zux%zu\nparams %llu\nmacs %llu\nflops %llu\nspatial_macs %llu\n", res, res,
                static_cast<unsigned long long>(r.params), static_cast<unsigned long long>(r.macs),
                static_cast<unsigned long long>(r.flops), static_cast<unsigned long long>(r.spatial_macs));
    return 0;
}

int fail(const char* category, const std::string& message, int code) {
    std::cerr << "error: " << category << ": " << message << '\n';
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"MCD-Net moraine segmentation toolkit"};
    app.require_subcommand(1);

    SynthArgs synth;
    auto* s = app.add_subcommand("synth", "generate a synthetic moraine dataset");
    s->add_option("--n", synth.n, "number of samples")->check(CLI::PositiveNumber);
    s->add_option("--size", synth.size, "image side in pixels (multiple of 16)")->check(CLI::PositiveNumber);
    s->add_option("--fraction", synth.fraction, "mean moraine pixel fraction")->check(CLI::Range(0.0, 1.0));
    s->add_option("--spread", synth.spread, "half-width of the per-image fraction range")->check(CLI::Range(0.0, 1.0));
    s->add_option("--region2-brightness", synth.region2_brightness, "brightness added to region-2 images")
        ->check(CLI::Range(-1.0, 1.0));
    s->add_option("--seed", synth.seed, "generator seed");
    s->add_option("--out", synth.out, "output directory")->required();

    std::string manifest, out, config, checkpoint, split = "test", image, layer;
    std::size_t bins = 20, res = 1024;
    int cls = 1;
    auto* st = app.add_subcommand("stats", "class proportions and area histogram");
    st->add_option("--manifest", manifest, "dataset manifest")->required();
    st->add_option("--out", out, "output directory")->required();
    st->add_option("--bins", bins, "histogram bins")->check(CLI::PositiveNumber);

    auto* tr = app.add_subcommand("train", "train a model from a run config");
    tr->add_option("--config", config, "run config (INI)")->required();

    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a split");
    ev->add_option("--config", config, "run config (INI)")->required();
    ev->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
    ev->add_option("--split", split, "train, val, test or all")->check(CLI::IsMember({"train", "val", "test", "all"}));
    ev->add_option("--out", out, "output directory (default: config out_dir)");

    auto* xr = app.add_subcommand("xregion", "bidirectional cross-region evaluation");
    xr->add_option("--config", config, "run config (INI)")->required();

    auto* inf = app.add_subcommand("infer", "predict a mask for one image");
    inf->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
    inf->add_option("--image", image, "RGB PNG")->required();
    inf->add_option("--out", out, "output directory")->required();

    auto* gc = app.add_subcommand("gradcam", "Grad-CAM heatmap for one image");
    gc->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
    gc->add_option("--image", image, "RGB PNG")->required();
    gc->add_option("--class", cls, "target class")->check(CLI::Range(0, 1));
    gc->add_option("--layer", layer, "f_low, f_base, f_att or f_aspp");
    gc->add_option("--out", out, "output directory")->required();

    auto* fl = app.add_subcommand("flops", "parameter and MAC count");
    fl->add_option("--config", config, "run config (INI); defaults to the full model");
    fl->add_option("--res", res, "square input resolution")->check(CLI::PositiveNumber);
    fl->add_option("--out", out, "output directory (default: config out_dir)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail("usage", e.what(), 2);
    }

    try {
        if (*s) return cmd_synth(synth);
        if (*st) return cmd_stats(manifest, out, bins);
        if (*tr) return cmd_train(config);
        if (*ev) return cmd_eval(config, checkpoint, split, out);
        if (*xr) return cmd_xregion(config);
        if (*inf) return cmd_infer(checkpoint, image, out);
        if (*gc) return cmd_gradcam(checkpoint, image, cls, layer, out);
        if (*fl) return cmd_flops(config, res, out);
    } catch (const UsageError& e) {
        return fail("usage", e.what(), 2);
    } catch (const ConfigError& e) {
        return fail("config", e.what(), 2);
    } catch (const IoError& e) {
        return fail("io", e.what(), 1);
    } catch (const DataError& e) {
        return fail("data", e.what(), 1);
    } catch (const CheckpointError& e) {
        return fail("checkpoint", e.what(), 1);
    } catch (const NumericError& e) {
        return fail("numeric", e.what(), 1);
    } catch (const ShapeError& e) {
        return fail("shape", e.what(), 1);
    } catch (const std::exception& e) {
        return fail("runtime", e.what(), 1);
    }
    return 0;
}
