// Copyright (C) 2026 The invlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "invlab/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>
#include <omp.h>

#include "invlab/errors.hpp"
#include "invlab/metrics.hpp"
#include "invlab/mlp.hpp"
#include "invlab/report_io.hpp"

namespace invlab {

using nlohmann::json;

namespace {

struct Cell {
    std::optional<ResultRow> row;
    InversionReport report;
    std::optional<RunError> error;
};

std::string opt_number(const std::optional<double>& x) { return x ? format_double(*x) : ""; }

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FileError("cannot write " + path.string());
    out << text;
    if (!out) throw FileError("write failed: " + path.string());
}

json quartiles_json(const Quartiles& q) { return {{"q1", q.q1}, {"median", q.median}, {"q3", q.q3}}; }

std::optional<double> numeric_value(const std::string& s) {
    double x = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
    if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
    return x;
}

Cell evaluate_cell(const ExperimentConfig& config, const std::string& method, const Instance& inst,
                   const NoiseSchedule& schedule, const Denoiser& denoiser) {
    Cell cell;
    try {
        InversionReport report = run_method(method, inst, schedule, denoiser, config.inversion);
        const Latent z_hat = reconstruct(report.z_T, schedule, denoiser, inst.ideal, config.inversion.cfg_scale);
        const GapSummary gap = summarize_gap(report.z_T, inst.z_T_star, inst.z0, z_hat, config.dataset.dynamic_range);
        ResultRow row;
        row.instance = inst.id;
        row.method = method;
        row.config_hash = config.hash(method);
        row.seed = config.seed;
        row.d_noi = gap.d_noi;
        row.d_noi_rms = gap.d_noi_rms;
        row.d_rec = gap.d_rec;
        row.psnr = gap.psnr;
        row.ssim = gap.ssim;
        row.iterations = report.total_iterations();
        row.wall_time_s = report.wall_time_s;
        cell.row = row;
        cell.report = std::move(report);
    } catch (const std::exception& e) {
        cell.error = RunError{inst.id, method, e.what()};
    }
    return cell;
}

} // namespace

Quartiles quartiles(std::vector<double> v) {
    if (v.empty()) throw ParameterError("quartiles: empty input");
    std::sort(v.begin(), v.end());
    auto at = [&](double p) {
        const double pos = p * static_cast<double>(v.size() - 1);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const auto hi = std::min(lo + 1, v.size() - 1);
        const double frac = pos - static_cast<double>(lo);
        return v[lo] + frac * (v[hi] - v[lo]);
    };
    return {at(0.25), at(0.5), at(0.75)};
}

NoiseSchedule make_schedule(const ScheduleSpec& spec) {
    return make_linear_schedule(spec.steps, spec.beta_start, spec.beta_end);
}

std::unique_ptr<Denoiser> make_denoiser(const ExperimentConfig& config, const NoiseSchedule& schedule) {
    if (config.denoiser == "gm-oracle") {
        return std::make_unique<GaussianMixture>(build_mixture(config.dataset, schedule, config.seed));
    }
    if (config.denoiser.rfind("mlp:", 0) == 0) {
        auto net = std::make_unique<MlpDenoiser>(MlpDenoiser::load(std::filesystem::path(config.denoiser.substr(4))));
        if (net->latent_shape() != config.dataset.shape) {
            throw ConfigError("denoiser: network latent shape " + net->latent_shape().to_string() +
                              " does not match dataset.shape " + config.dataset.shape.to_string());
        }
        if (net->steps() != schedule.steps()) throw ConfigError("denoiser: network T differs from schedule.steps");
        return net;
    }
    throw ConfigError("denoiser: expected gm-oracle or mlp:<path>");
}

InversionReport run_method(const std::string& method, const Instance& inst, const NoiseSchedule& schedule,
                           const Denoiser& denoiser, const InversionConfig& inversion) {
    InversionReport report;
    if (method == "ddim") {
        report = ddim_invert(inst.z0, schedule, denoiser, inst.prompt, inversion.cfg_scale);
    } else if (method == "picard") {
        report = picard_invert(inst.z0, schedule, denoiser, inst.prompt, inversion.K, inversion.delta,
                               inversion.cfg_scale);
    } else if (method == "spd" || method == "dci") {
        InversionConfig cfg = inversion;
        if (method == "spd") cfg.lambda = 0.0;
        const ReferenceNoise ref = inversion.reference_mode == ReferenceMode::Oracle
                                       ? extract_reference(inst.z0, ReferenceMode::Oracle, inst.eps_forward)
                                       : extract_reference(inst.z0, ReferenceMode::Whitened);
        report = dci_invert(inst.z0, schedule, denoiser, inst.prompt, cfg, ref);
    } else {
        throw ParameterError("method: unknown '" + method + "'");
    }
    report.method = method;
    return report;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
    return run_experiment(config, config.parallel ? Execution::Parallel : Execution::Serial);
}

ExperimentResult run_experiment(const ExperimentConfig& config, Execution execution) {
    config.validate();
    const NoiseSchedule schedule = make_schedule(config.schedule);
    const std::unique_ptr<Denoiser> denoiser = make_denoiser(config, schedule);

    const int n = config.dataset.instances;
    const int m = static_cast<int>(config.methods.size());
    std::vector<std::optional<Instance>> instances(static_cast<std::size_t>(n));
    std::vector<std::string> synth_errors(static_cast<std::size_t>(n));
    std::vector<Cell> cells(static_cast<std::size_t>(n) * static_cast<std::size_t>(m));

    auto synth = [&](int i) {
        try {
            instances[static_cast<std::size_t>(i)] =
                synth_instance(config.dataset, schedule, *denoiser, config.seed, i, config.inversion.cfg_scale);
        } catch (const std::exception& e) {
            synth_errors[static_cast<std::size_t>(i)] = e.what();
        }
    };
    auto run_cell = [&](int idx) {
        const int i = idx / m;
        const auto& inst = instances[static_cast<std::size_t>(i)];
        const std::string& method = config.methods[static_cast<std::size_t>(idx % m)];
        if (!inst) {
            cells[static_cast<std::size_t>(idx)].error =
                RunError{i, method, "synthesis failed: " + synth_errors[static_cast<std::size_t>(i)]};
            return;
        }
        cells[static_cast<std::size_t>(idx)] = evaluate_cell(config, method, *inst, schedule, *denoiser);
    };

    if (execution == Execution::Serial) {
        for (int i = 0; i < n; ++i) synth(i);
        for (int idx = 0; idx < n * m; ++idx) run_cell(idx);
    } else {
        const int threads = config.threads > 0 ? config.threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(threads)
        for (int i = 0; i < n; ++i) synth(i);
#pragma omp parallel for schedule(dynamic) num_threads(threads)
        for (int idx = 0; idx < n * m; ++idx) run_cell(idx);
    }

    ExperimentResult result;
    result.config = config;
    for (auto& cell : cells) {
        if (cell.row) {
            result.rows.push_back(*cell.row);
            result.reports.push_back(std::move(cell.report));
        }
        if (cell.error) result.errors.push_back(*cell.error);
    }
    result.summary = summarize(result.rows, config.methods);
    return result;
}

std::vector<MethodSummary> summarize(const std::vector<ResultRow>& rows, const std::vector<std::string>& methods) {
    std::vector<MethodSummary> out;
    for (const auto& method : methods) {
        std::vector<double> d_noi, d_noi_rms, d_rec, psnr, ssim;
        double iters = 0.0;
        MethodSummary s;
        s.method = method;
        for (const auto& r : rows) {
            if (r.method != method) continue;
            s.config_hash = r.config_hash;
            d_noi.push_back(r.d_noi);
            d_noi_rms.push_back(r.d_noi_rms);
            d_rec.push_back(r.d_rec);
            psnr.push_back(r.psnr);
            if (r.ssim) ssim.push_back(*r.ssim);
            iters += r.iterations;
        }
        if (d_noi.empty()) continue;
        s.count = static_cast<int>(d_noi.size());
        s.d_noi = quartiles(d_noi);
        s.d_noi_rms = quartiles(d_noi_rms);
        s.d_rec = quartiles(d_rec);
        s.psnr = quartiles(psnr);
        if (!ssim.empty()) s.ssim = quartiles(ssim);
        s.iterations_mean = iters / s.count;
        out.push_back(s);
    }
    return out;
}

std::string results_csv(const std::vector<ResultRow>& rows) {
    std::string out = std::string(kResultsHeader) + "\n";
    for (const auto& r : rows) {
        out += std::to_string(r.instance) + "," + r.method + "," + r.config_hash + "," + std::to_string(r.seed) + "," +
               format_double(r.d_noi) + "," + format_double(r.d_noi_rms) + "," + format_double(r.d_rec) + "," +
               format_double(r.psnr) + "," + opt_number(r.ssim) + "," + std::to_string(r.iterations) + "\n";
    }
    return out;
}

std::string summary_json(const ExperimentResult& result) {
    json methods = json::object();
    for (const auto& s : result.summary) {
        methods[s.method] = {{"config_hash", s.config_hash},
                             {"count", s.count},
                             {"d_noi", quartiles_json(s.d_noi)},
                             {"d_noi_rms", quartiles_json(s.d_noi_rms)},
                             {"d_rec", quartiles_json(s.d_rec)},
                             {"psnr", quartiles_json(s.psnr)},
                             {"ssim", s.ssim ? quartiles_json(*s.ssim) : json(nullptr)},
                             {"iterations_mean", s.iterations_mean}};
    }
    json j = {{"config_hash", result.config.hash()},
              {"seed", result.config.seed},
              {"instances", result.config.dataset.instances},
              {"errors", result.errors.size()},
              {"methods", methods}};
    return j.dump(2) + "\n";
}

void write_results(const ExperimentResult& result, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw FileError("cannot create " + dir.string() + ": " + ec.message());
    write_text(dir / "results.csv", results_csv(result.rows));
    write_text(dir / "summary.json", summary_json(result));

    std::string errors;
    for (const auto& e : result.errors) {
        errors += std::to_string(e.instance) + "\t" + e.method + "\t" + e.message + "\n";
    }
    write_text(dir / "errors.txt", errors);

    const auto reports_dir = dir / "reports";
    std::filesystem::remove_all(reports_dir, ec);
    if (result.config.reports && !result.rows.empty()) {
        std::filesystem::create_directories(reports_dir, ec);
        if (ec) throw FileError("cannot create " + reports_dir.string());
        for (std::size_t i = 0; i < result.rows.size(); ++i) {
            const auto& row = result.rows[i];
            char name[64];
            std::snprintf(name, sizeof name, "%s_%05d.jsonl", row.method.c_str(), row.instance);
            std::ostringstream os;
            write_report(os, result.reports[i], row.instance, row.config_hash);
            write_text(reports_dir / name, os.str());
        }
    }

    if (result.config.timing) {
        std::string t = "instance,method,wall_time_s\n";
        for (const auto& r : result.rows) {
            t += std::to_string(r.instance) + "," + r.method + "," + format_double(r.wall_time_s) + "\n";
        }
        write_text(dir / "timings.csv", t);
    } else {
        std::filesystem::remove(dir / "timings.csv", ec);
    }
}

SweepResult run_sweep(const ExperimentConfig& config) {
    return run_sweep(config, config.parallel ? Execution::Parallel : Execution::Serial);
}

SweepResult run_sweep(const ExperimentConfig& config, Execution execution) {
    if (config.sweep.param.empty()) throw ConfigError("sweep.param is not set");
    if (config.sweep.values.empty()) throw ConfigError("sweep.values must be nonempty");
    if (config.sweep.param.rfind("sweep.", 0) == 0 || config.sweep.param.rfind("output.", 0) == 0 ||
        config.sweep.param.rfind("run.", 0) == 0) {
        throw ConfigError("sweep.param: '" + config.sweep.param + "' cannot be swept");
    }
    SweepResult out;
    out.param = config.sweep.param;
    for (const auto& value : config.sweep.values) {
        KeyValues keys = config.to_keys();
        if (!keys.has(config.sweep.param)) throw ConfigError("sweep.param: unknown key '" + config.sweep.param + "'");
        keys.set(config.sweep.param, value);
        keys.set("methods", config.sweep.method);
        keys.set("sweep.param", "");
        keys.set("sweep.values", "");
        ExperimentConfig point = ExperimentConfig::from_keys(keys);
        ExperimentResult r = run_experiment(point, execution);
        SweepRow row;
        row.value = value;
        row.config = point;
        row.errors = static_cast<int>(r.errors.size());
        if (!r.summary.empty()) {
            row.summary = r.summary.front();
        } else {
            row.summary.method = config.sweep.method;
            row.summary.config_hash = point.hash(config.sweep.method);
        }
        out.errors.insert(out.errors.end(), r.errors.begin(), r.errors.end());
        out.rows.push_back(std::move(row));
    }
    std::stable_sort(out.rows.begin(), out.rows.end(), [](const SweepRow& a, const SweepRow& b) {
        const auto x = numeric_value(a.value);
        const auto y = numeric_value(b.value);
        if (x && y) return *x < *y;
        if (x || y) return x.has_value();
        return a.value < b.value;
    });
    return out;
}

std::string ablation_csv(const SweepResult& sweep) {
    std::string out = std::string(kAblationHeader) + "\n";
    for (const auto& r : sweep.rows) {
        const auto& s = r.summary;
        const bool any = s.count > 0;
        auto num = [&](double x) { return any ? format_double(x) : std::string(); };
        out += sweep.param + "," + r.value + "," + s.method + "," + s.config_hash + "," + std::to_string(s.count) +
               "," + std::to_string(r.errors) + "," + num(s.d_noi.q1) + "," + num(s.d_noi.median) + "," +
               num(s.d_noi.q3) + "," + num(s.d_rec.q1) + "," + num(s.d_rec.median) + "," + num(s.d_rec.q3) + "," +
               num(s.psnr.median) + "," + (s.ssim ? format_double(s.ssim->median) : "") + "," +
               num(s.iterations_mean) + "\n";
    }
    return out;
}

void write_sweep(const SweepResult& sweep, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw FileError("cannot create " + dir.string() + ": " + ec.message());
    write_text(dir / "ablation.csv", ablation_csv(sweep));
    std::string errors;
    for (const auto& e : sweep.errors) errors += std::to_string(e.instance) + "\t" + e.method + "\t" + e.message + "\n";
    write_text(dir / "errors.txt", errors);
}

int exit_status(const std::vector<RunError>& errors) { return errors.empty() ? 0 : 2; }

} // namespace invlab
