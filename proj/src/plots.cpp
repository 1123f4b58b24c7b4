// Copyright (C) 2026 The invlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "invlab/plots.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "invlab/errors.hpp"

namespace invlab {

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 400.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 20.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 50.0;
constexpr double kLogFloor = -16.0;

std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", x);
    return buf;
}

std::string escape(const std::string& s) {
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

struct Frame {
    double x0, x1, y0, y1;

    double px(double x) const {
        return kLeft + (x1 > x0 ? (x - x0) / (x1 - x0) : 0.5) * (kWidth - kLeft - kRight);
    }
    double py(double y) const {
        return kHeight - kBottom - (y1 > y0 ? (y - y0) / (y1 - y0) : 0.5) * (kHeight - kTop - kBottom);
    }
};

std::string open_svg(const std::string& title) {
    return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(kWidth) + "\" height=\"" + fmt(kHeight) +
           "\" viewBox=\"0 0 " + fmt(kWidth) + " " + fmt(kHeight) + "\">\n" +
           "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n" + "<text x=\"" + fmt(kWidth / 2) +
           "\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">" + escape(title) +
           "</text>\n";
}

std::string axes(const Frame& f, const std::string& xlabel, const std::string& ylabel) {
    std::string s;
    s += "<line x1=\"" + fmt(kLeft) + "\" y1=\"" + fmt(kHeight - kBottom) + "\" x2=\"" + fmt(kWidth - kRight) +
         "\" y2=\"" + fmt(kHeight - kBottom) + "\" stroke=\"black\"/>\n";
    s += "<line x1=\"" + fmt(kLeft) + "\" y1=\"" + fmt(kTop) + "\" x2=\"" + fmt(kLeft) + "\" y2=\"" +
         fmt(kHeight - kBottom) + "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double y = f.y0 + (f.y1 - f.y0) * i / 4.0;
        s += "<text x=\"" + fmt(kLeft - 6) + "\" y=\"" + fmt(f.py(y) + 4) +
             "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" + fmt(y) + "</text>\n";
    }
    s += "<text x=\"" + fmt((kLeft + kWidth - kRight) / 2) + "\" y=\"" + fmt(kHeight - 12) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" + escape(xlabel) + "</text>\n";
    s += "<text x=\"16\" y=\"" + fmt((kTop + kHeight - kBottom) / 2) + "\" transform=\"rotate(-90 16 " +
         fmt((kTop + kHeight - kBottom) / 2) + ")\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" +
         escape(ylabel) + "</text>\n";
    return s;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(item);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FileError("cannot write " + path.string());
    out << text;
}

} // namespace

std::string trace_svg(const ReportFile& report) {
    std::vector<double> ys;
    std::vector<std::size_t> boundaries;
    for (const auto& s : report.steps) {
        boundaries.push_back(ys.size());
        for (const double l : s.l_fix) ys.push_back(l > 0.0 ? std::max(std::log10(l), kLogFloor) : kLogFloor);
    }
    std::string title = report.method + " #" + std::to_string(report.instance) + " [" + report.config_hash + "]";
    std::string s = open_svg(title);
    if (ys.empty()) {
        s += "<text x=\"" + fmt(kWidth / 2) + "\" y=\"" + fmt(kHeight / 2) +
             "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">no fixed-point evaluations</text>\n";
        return s + "</svg>\n";
    }
    Frame f{0.0, static_cast<double>(std::max<std::size_t>(ys.size() - 1, 1)), *std::min_element(ys.begin(), ys.end()),
            *std::max_element(ys.begin(), ys.end())};
    if (f.y1 - f.y0 < 1e-9) {
        f.y0 -= 0.5;
        f.y1 += 0.5;
    }
    s += axes(f, "evaluation (timesteps T..1)", "log10 L_fix");
    for (const auto b : boundaries) {
        s += "<line x1=\"" + fmt(f.px(static_cast<double>(b))) + "\" y1=\"" + fmt(kTop) + "\" x2=\"" +
             fmt(f.px(static_cast<double>(b))) + "\" y2=\"" + fmt(kHeight - kBottom) +
             "\" stroke=\"#dddddd\" stroke-width=\"0.5\"/>\n";
    }
    s += "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.2\" points=\"";
    for (std::size_t i = 0; i < ys.size(); ++i) {
        s += (i ? " " : "") + fmt(f.px(static_cast<double>(i))) + "," + fmt(f.py(ys[i]));
    }
    s += "\"/>\n</svg>\n";
    return s;
}

std::string strip_svg(const std::vector<StripPoint>& points, const std::string& title) {
    std::vector<std::string> methods;
    for (const auto& p : points) {
        if (std::find(methods.begin(), methods.end(), p.method) == methods.end()) methods.push_back(p.method);
    }
    std::string s = open_svg(title);
    if (points.empty()) return s + "</svg>\n";
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& p : points) {
        lo = std::min(lo, p.value);
        hi = std::max(hi, p.value);
    }
    if (hi - lo < 1e-12) {
        lo -= 0.5;
        hi += 0.5;
    }
    Frame f{-0.5, static_cast<double>(methods.size()) - 0.5, lo, hi};
    s += axes(f, "method", "d_noi");
    static const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"};
    std::vector<int> seen(methods.size(), 0);
    for (const auto& p : points) {
        const auto m = static_cast<std::size_t>(std::find(methods.begin(), methods.end(), p.method) - methods.begin());
        // Golden-ratio jitter keeps the layout a pure function of input order.
        const double jitter = std::fmod(seen[m]++ * 0.6180339887498949, 1.0) - 0.5;
        s += "<circle cx=\"" + fmt(f.px(static_cast<double>(m) + 0.5 * jitter)) + "\" cy=\"" + fmt(f.py(p.value)) +
             "\" r=\"2.5\" fill=\"" + colors[m % 6] + "\" fill-opacity=\"0.6\"/>\n";
    }
    for (std::size_t m = 0; m < methods.size(); ++m) {
        s += "<text x=\"" + fmt(f.px(static_cast<double>(m))) + "\" y=\"" + fmt(kHeight - kBottom + 16) +
             "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" + escape(methods[m]) +
             "</text>\n";
    }
    return s + "</svg>\n";
}

std::vector<std::filesystem::path> emit_plots(const std::filesystem::path& results_dir) {
    const auto csv_path = results_dir / "results.csv";
    std::ifstream in(csv_path);
    if (!in) throw FileError("missing results: " + csv_path.string());
    std::string line;
    if (!std::getline(in, line)) throw FileError("empty results file: " + csv_path.string());
    const auto header = split_csv_line(line);
    const auto col = [&](const std::string& name) {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw FileError("results.csv: missing column " + name);
        return static_cast<std::size_t>(it - header.begin());
    };
    const std::size_t method_col = col("method");
    const std::size_t dnoi_col = col("d_noi");
    std::vector<StripPoint> points;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != header.size()) throw FileError("results.csv: ragged row");
        try {
            points.push_back({cells[method_col], std::stod(cells[dnoi_col])});
        } catch (const std::logic_error&) {
            throw FileError("results.csv: bad d_noi value '" + cells[dnoi_col] + "'");
        }
    }

    std::vector<std::filesystem::path> written;
    if (points.empty()) return written;

    const auto plots_dir = results_dir / "plots";
    std::error_code ec;
    std::filesystem::create_directories(plots_dir, ec);
    if (ec) throw FileError("cannot create " + plots_dir.string());

    std::vector<std::filesystem::path> reports;
    const auto reports_dir = results_dir / "reports";
    if (std::filesystem::is_directory(reports_dir)) {
        for (const auto& e : std::filesystem::directory_iterator(reports_dir)) {
            if (e.path().extension() == ".jsonl") reports.push_back(e.path());
        }
    }
    std::sort(reports.begin(), reports.end());
    for (const auto& p : reports) {
        const ReportFile rf = read_report(p);
        char name[96];
        std::snprintf(name, sizeof name, "trace_%s_%05d.svg", rf.method.c_str(), rf.instance);
        write_text(plots_dir / name, trace_svg(rf));
        written.push_back(plots_dir / name);
    }
    write_text(plots_dir / "d_noi_strip.svg", strip_svg(points, "d_noi by method"));
    written.push_back(plots_dir / "d_noi_strip.svg");
    std::sort(written.begin(), written.end());
    return written;
}

} // namespace invlab
