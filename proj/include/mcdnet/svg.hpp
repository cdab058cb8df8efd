#pragma once

// Minimal self-contained SVG charts. Output depends only on the inputs, so
// reruns are byte-identical.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mcdnet::svg {

namespace detail {

inline constexpr double kWidth = 480, kHeight = 320, kLeft = 60, kRight = 20, kTop = 36, kBottom = 48;

inline std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

inline std::string label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

inline std::string escape(const std::string& s) {
    std::string out;
    for (const char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

inline std::string open(const std::string& title) {
    std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(kWidth) + "\" height=\"" + fmt(kHeight) +
                    "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s += "<text x=\"" + fmt(kWidth / 2) + "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" + escape(title) + "</text>\n";
    return s;
}

inline std::string axes(double y_max, const std::string& x_label, const std::string& y_label) {
    const double x0 = kLeft, y0 = kHeight - kBottom, x1 = kWidth - kRight, y1 = kTop;
    std::string s = "<line x1=\"" + fmt(x0) + "\" y1=\"" + fmt(y0) + "\" x2=\"" + fmt(x1) + "\" y2=\"" + fmt(y0) +
                    "\" stroke=\"black\"/>\n";
    s += "<line x1=\"" + fmt(x0) + "\" y1=\"" + fmt(y0) + "\" x2=\"" + fmt(x0) + "\" y2=\"" + fmt(y1) + "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double y = y0 - (y0 - y1) * i / 4.0;
        s += "<text x=\"" + fmt(x0 - 6) + "\" y=\"" + fmt(y + 4) + "\" text-anchor=\"end\">" + label(y_max * i / 4.0) +
             "</text>\n";
    }
    s += "<text x=\"" + fmt((x0 + x1) / 2) + "\" y=\"" + fmt(kHeight - 10) + "\" text-anchor=\"middle\">" +
         escape(x_label) + "</text>\n";
    s += "<text x=\"14\" y=\"" + fmt((y0 + y1) / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 14 " +
         fmt((y0 + y1) / 2) + ")\">" + escape(y_label) + "</text>\n";
    return s;
}

inline double nice_max(double v) { return v > 0 ? v * 1.05 : 1.0; }

}  // namespace detail

/// Vertical bars with category labels under each bar.
inline std::string bar_chart(const std::string& title, const std::vector<std::pair<std::string, double>>& bars,
                             const std::string& y_label, double y_max = 0) {
    using namespace detail;
    if (bars.empty()) throw std::invalid_argument("bar_chart: no bars");
    double top = y_max;
    for (const auto& b : bars) top = std::max(top, b.second);
    top = y_max > 0 ? y_max : nice_max(top);
    const double plot_w = kWidth - kLeft - kRight, plot_h = kHeight - kTop - kBottom;
    const double slot = plot_w / static_cast<double>(bars.size());
    std::string s = open(title) + axes(top, "", y_label);
    for (std::size_t i = 0; i < bars.size(); ++i) {
        const double h = std::max(0.0, bars[i].second) / top * plot_h;
        const double x = kLeft + slot * (static_cast<double>(i) + 0.15);
        s += "<rect class=\"bar\" x=\"" + fmt(x) + "\" y=\"" + fmt(kTop + plot_h - h) + "\" width=\"" + fmt(slot * 0.7) +
             "\" height=\"" + fmt(h) + "\" fill=\"#4477aa\"><title>" + escape(bars[i].first) + ": " + label(bars[i].second) +
             "</title></rect>\n";
        s += "<text x=\"" + fmt(x + slot * 0.35) + "\" y=\"" + fmt(kTop + plot_h + 14) + "\" text-anchor=\"middle\">" +
             escape(bars[i].first) + "</text>\n";
    }
    return s + "</svg>\n";
}

/// Histogram over [lo, hi] with equal-width bins.
inline std::string histogram(const std::string& title, const std::vector<std::size_t>& counts, double lo, double hi,
                             const std::string& x_label) {
    using namespace detail;
    if (counts.empty()) throw std::invalid_argument("histogram: no bins");
    const double top = nice_max(static_cast<double>(*std::max_element(counts.begin(), counts.end())));
    const double plot_w = kWidth - kLeft - kRight, plot_h = kHeight - kTop - kBottom;
    const double bw = plot_w / static_cast<double>(counts.size());
    std::string s = open(title) + axes(top, x_label, "images");
    for (std::size_t i = 0; i < counts.size(); ++i) {
        const double h = static_cast<double>(counts[i]) / top * plot_h;
        s += "<rect class=\"bar\" x=\"" + fmt(kLeft + bw * static_cast<double>(i)) + "\" y=\"" + fmt(kTop + plot_h - h) +
             "\" width=\"" + fmt(bw) + "\" height=\"" + fmt(h) + "\" fill=\"#66aa55\" stroke=\"white\"/>\n";
    }
    s += "<text x=\"" + fmt(kLeft) + "\" y=\"" + fmt(kTop + plot_h + 14) + "\" text-anchor=\"middle\">" + label(lo) + "</text>\n";
    s += "<text x=\"" + fmt(kWidth - kRight) + "\" y=\"" + fmt(kTop + plot_h + 14) + "\" text-anchor=\"middle\">" + label(hi) +
         "</text>\n";
    return s + "</svg>\n";
}

/// Polyline of y against 1..n.
inline std::string line_chart(const std::string& title, const std::vector<double>& ys, const std::string& x_label,
                              const std::string& y_label) {
    using namespace detail;
    if (ys.empty()) throw std::invalid_argument("line_chart: no points");
    double top = 0;
    for (const double y : ys)
        if (std::isfinite(y)) top = std::max(top, y);
    top = nice_max(top);
    const double plot_w = kWidth - kLeft - kRight, plot_h = kHeight - kTop - kBottom;
    std::string s = open(title) + axes(top, x_label, y_label);
    s += "<polyline fill=\"none\" stroke=\"#cc3311\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < ys.size(); ++i) {
        const double x = kLeft + (ys.size() == 1 ? 0.0 : plot_w * static_cast<double>(i) / static_cast<double>(ys.size() - 1));
        const double y = kTop + plot_h - std::clamp(ys[i], 0.0, top) / top * plot_h;
        s += (i ? " " : "") + fmt(x) + "," + fmt(y);
    }
    s += "\"/>\n";
    s += "<text x=\"" + fmt(kWidth - kRight) + "\" y=\"" + fmt(kTop + plot_h + 14) + "\" text-anchor=\"end\">" +
         std::to_string(ys.size()) + "</text>\n";
    return s + "</svg>\n";
}

inline void write(const std::filesystem::path& path, const std::string& doc) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << doc;
}

}  // namespace mcdnet::svg
