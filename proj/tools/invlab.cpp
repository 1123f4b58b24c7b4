// Copyright (C) 2026 The invlab Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "invlab/config.hpp"
#include "invlab/dataset.hpp"
#include "invlab/errors.hpp"
#include "invlab/experiment.hpp"
#include "invlab/metrics.hpp"
#include "invlab/mlp.hpp"
#include "invlab/plots.hpp"
#include "invlab/report_io.hpp"
#include "invlab/rng.hpp"

using namespace invlab;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

struct Common {
    std::string config_file;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
    std::string out;

    ExperimentConfig load() const {
        std::vector<std::string> all = overrides;
        if (seed) all.push_back("seed=" + std::to_string(*seed));
        if (!out.empty()) all.push_back("output.dir=" + out);
        return load_config(config_file.empty() ? std::nullopt : std::optional<std::filesystem::path>(config_file),
                           all);
    }
};

void add_common(CLI::App* cmd, Common& c, bool with_out = true) {
    cmd->add_option("-c,--config", c.config_file, "key = value config file");
    cmd->add_option("-s,--set", c.overrides, "override a config key (key=value), repeatable");
    cmd->add_option("--seed", c.seed, "base seed (overrides INVLAB_SEED)");
    if (with_out) cmd->add_option("-o,--out", c.out, "output directory (output.dir)");
}

void ensure_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw FileError("cannot create " + dir.string() + ": " + ec.message());
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FileError("cannot write " + path.string());
    out << text;
}

json latent_json(const Latent& z) { return json::parse(latent_to_json(z)); }

Instance instance_for(const ExperimentConfig& cfg, const NoiseSchedule& schedule, const Denoiser& den, int id) {
    if (id < 0 || id >= cfg.dataset.instances) {
        throw ParameterError("instance: expected 0.." + std::to_string(cfg.dataset.instances - 1));
    }
    return synth_instance(cfg.dataset, schedule, den, cfg.seed, id, cfg.inversion.cfg_scale);
}

int cmd_synth(const Common& common, bool with_trace) {
    const ExperimentConfig cfg = common.load();
    const NoiseSchedule schedule = make_schedule(cfg.schedule);
    const auto den = make_denoiser(cfg, schedule);
    const auto data = synth_dataset(cfg.dataset, schedule, *den, cfg.seed, cfg.inversion.cfg_scale);
    json items = json::array();
    for (const auto& inst : data) {
        json j = {{"id", inst.id},
                  {"component", inst.component},
                  {"label", inst.label},
                  {"ideal", conditioning_spec(inst.ideal)},
                  {"prompt", conditioning_spec(inst.prompt)},
                  {"z_T_star", latent_json(inst.z_T_star)},
                  {"z0", latent_json(inst.z0)},
                  {"eps_forward", latent_json(inst.eps_forward)}};
        if (with_trace) {
            json trace = json::array();
            for (const auto& e : inst.eps_trace) trace.push_back(latent_json(e));
            j["eps_trace"] = trace;
        }
        items.push_back(j);
    }
    ensure_dir(cfg.output_dir);
    json doc = {{"config_hash", cfg.hash()}, {"seed", cfg.seed}, {"instances", items}};
    write_file(cfg.output_dir / "dataset.json", doc.dump() + "\n");
    std::cout << "wrote " << data.size() << " instances to " << (cfg.output_dir / "dataset.json").string() << "\n";
    return kExitOk;
}

struct TrainArgs {
    std::string model = "model.txt";
    int epochs = 20;
    double lr = 1e-2;
    std::size_t batch = 16;
    int samples = 512;
    double null_probability = 0.1;
    std::vector<std::size_t> hidden = {64};
};

int cmd_train(const Common& common, const TrainArgs& a) {
    const ExperimentConfig cfg = common.load();
    const NoiseSchedule schedule = make_schedule(cfg.schedule);
    const GaussianMixture gm = build_mixture(cfg.dataset, schedule, cfg.seed);
    Rng rng = Rng(cfg.seed).split(0x747261696eULL);
    const bool by_component = cfg.dataset.ideal == "component";
    const std::size_t cond_dim =
        static_cast<std::size_t>(by_component ? cfg.dataset.components() : cfg.dataset.classes);
    std::vector<TrainingExample> examples;
    for (int i = 0; i < a.samples; ++i) {
        const int k = static_cast<int>(rng.below(gm.components()));
        Conditioning c = Conditioning::class_label(gm.labels()[static_cast<std::size_t>(k)]);
        if (by_component) {
            std::vector<double> onehot(cond_dim, 0.0);
            onehot[static_cast<std::size_t>(k)] = 1.0;
            c = Conditioning::embedding(onehot);
        }
        std::vector<double> z(gm.shape().size());
        for (std::size_t d = 0; d < z.size(); ++d) z[d] = gm.means()[static_cast<std::size_t>(k)][d] + gm.sigma0() * rng.normal();
        examples.push_back({Latent(gm.shape(), z), c});
    }
    TrainingOptions opt;
    opt.epochs = a.epochs;
    opt.learning_rate = a.lr;
    opt.batch_size = a.batch;
    opt.seed = cfg.seed;
    opt.null_probability = a.null_probability;
    opt.hidden = a.hidden;
    const TrainingResult r = train_mlp_denoiser(examples, schedule, cond_dim, opt);
    r.denoiser.save(std::filesystem::path(a.model));
    for (std::size_t e = 0; e < r.loss_trace.size(); ++e) std::printf("epoch %zu loss %.6g\n", e + 1, r.loss_trace[e]);
    std::cout << "saved " << a.model << "\n";
    return kExitOk;
}

struct InvertArgs {
    int instance = 0;
    std::string method = "dci";
    std::string latent;
    std::string cond = "null";
};

int cmd_invert(const Common& common, const InvertArgs& a) {
    const ExperimentConfig cfg = common.load();
    const NoiseSchedule schedule = make_schedule(cfg.schedule);
    const auto den = make_denoiser(cfg, schedule);
    InversionReport report;
    std::optional<Instance> inst;
    if (!a.latent.empty()) {
        const Latent z0 = load_latent(a.latent);
        Instance adhoc;
        adhoc.z0 = z0;
        adhoc.prompt = parse_conditioning(a.cond);
        if (cfg.inversion.reference_mode == ReferenceMode::Oracle && (a.method == "dci" || a.method == "spd")) {
            throw ContractError("invert --latent: no ground-truth noise; set inversion.reference=whitened");
        }
        report = run_method(a.method, adhoc, schedule, *den, cfg.inversion);
    } else {
        inst = instance_for(cfg, schedule, *den, a.instance);
        report = run_method(a.method, *inst, schedule, *den, cfg.inversion);
    }
    ensure_dir(cfg.output_dir);
    save_latent(cfg.output_dir / "z_T.json", report.z_T);
    std::ostringstream os;
    write_report(os, report, a.instance, cfg.hash(a.method));
    write_file(cfg.output_dir / "report.jsonl", os.str());
    std::printf("method %s iterations %d\n", a.method.c_str(), report.total_iterations());
    if (inst) {
        const Latent z_hat = reconstruct(report.z_T, schedule, *den, inst->ideal, cfg.inversion.cfg_scale);
        const GapSummary g = summarize_gap(report.z_T, inst->z_T_star, inst->z0, z_hat, cfg.dataset.dynamic_range);
        std::printf("d_noi %.6g d_rec %.6g psnr %.4f\n", g.d_noi, g.d_rec, g.psnr);
    }
    return kExitOk;
}

int cmd_reconstruct(const Common& common, const std::string& latent, const std::string& cond, int from_t) {
    const ExperimentConfig cfg = common.load();
    const NoiseSchedule schedule = make_schedule(cfg.schedule);
    const auto den = make_denoiser(cfg, schedule);
    const Latent z = reconstruct(load_latent(latent), schedule, *den, parse_conditioning(cond), cfg.inversion.cfg_scale,
                                 from_t);
    ensure_dir(cfg.output_dir);
    save_latent(cfg.output_dir / "z0.json", z);
    std::cout << "wrote " << (cfg.output_dir / "z0.json").string() << "\n";
    return kExitOk;
}

int cmd_edit(const Common& common, int instance, const std::string& target) {
    const ExperimentConfig cfg = common.load();
    const NoiseSchedule schedule = make_schedule(cfg.schedule);
    const auto den = make_denoiser(cfg, schedule);
    const Instance inst = instance_for(cfg, schedule, *den, instance);
    Conditioning tgt = Conditioning::null();
    if (!target.empty()) {
        tgt = parse_conditioning(target);
    } else {
        const int k = (inst.component + cfg.dataset.components_per_class) % cfg.dataset.components();
        std::vector<double> onehot(static_cast<std::size_t>(cfg.dataset.components()), 0.0);
        onehot[static_cast<std::size_t>(k)] = 1.0;
        tgt = cfg.dataset.ideal == "component" ? Conditioning::embedding(onehot)
                                               : Conditioning::class_label(component_label(cfg.dataset, k));
    }
    const ReferenceNoise ref = cfg.inversion.reference_mode == ReferenceMode::Oracle
                                   ? extract_reference(inst.z0, ReferenceMode::Oracle, inst.eps_forward)
                                   : extract_reference(inst.z0, ReferenceMode::Whitened);
    const EditResult r = edit_condition_swap(inst.z0, schedule, *den, inst.ideal, tgt, cfg.inversion, ref);
    ensure_dir(cfg.output_dir);
    save_latent(cfg.output_dir / "edited.json", r.edited);
    std::printf("source %s target %s\n", conditioning_spec(inst.ideal).c_str(), conditioning_spec(tgt).c_str());
    std::printf("|edited - z0| %.6g\n", noise_gap(r.edited, inst.z0));
    return kExitOk;
}

int cmd_run(const Common& common) {
    const ExperimentConfig cfg = common.load();
    const ExperimentResult r = run_experiment(cfg);
    write_results(r, cfg.output_dir);
    for (const auto& s : r.summary) {
        std::printf("%-7s n=%d d_noi %.6g d_rec %.6g psnr %.3f iters %.1f\n", s.method.c_str(), s.count,
                    s.d_noi.median, s.d_rec.median, s.psnr.median, s.iterations_mean);
    }
    if (!r.errors.empty()) std::fprintf(stderr, "%zu run(s) failed; see errors.txt\n", r.errors.size());
    return exit_status(r.errors);
}

int cmd_sweep(Common common, const std::string& param, const std::string& values, const std::string& method) {
    if (!param.empty()) common.overrides.push_back("sweep.param=" + param);
    if (!values.empty()) common.overrides.push_back("sweep.values=" + values);
    if (!method.empty()) common.overrides.push_back("sweep.method=" + method);
    const ExperimentConfig cfg = common.load();
    if (cfg.sweep.param.empty()) throw ConfigError("sweep: --param (or sweep.param) is required");
    const SweepResult r = run_sweep(cfg);
    write_sweep(r, cfg.output_dir);
    std::cout << ablation_csv(r);
    return exit_status(r.errors);
}

int cmd_plot(const std::string& results) {
    const auto written = emit_plots(results);
    std::cout << "wrote " << written.size() << " plot file(s)\n";
    return kExitOk;
}

int cmd_report(const std::string& results) {
    const auto path = std::filesystem::path(results) / "summary.json";
    std::ifstream in(path);
    if (!in) throw FileError("missing " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw FileError(std::string("summary.json: ") + e.what());
    }
    std::printf("config %s seed %s instances %s errors %s\n", j.value("config_hash", "?").c_str(),
                j["seed"].dump().c_str(), j["instances"].dump().c_str(), j["errors"].dump().c_str());
    std::printf("%-8s %5s %12s %12s %12s %10s %8s\n", "method", "n", "d_noi", "d_noi_rms", "d_rec", "psnr", "iters");
    for (const auto& [name, m] : j["methods"].items()) {
        std::printf("%-8s %5d %12.6g %12.6g %12.6g %10.3f %8.1f\n", name.c_str(), m["count"].get<int>(),
                    m["d_noi"]["median"].get<double>(), m["d_noi_rms"]["median"].get<double>(),
                    m["d_rec"]["median"].get<double>(), m["psnr"]["median"].get<double>(),
                    m["iterations_mean"].get<double>());
    }
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"invlab: diffusion inversion experiments on analytic and small learned denoisers"};
    app.require_subcommand(1);

    Common common;
    bool with_trace = false;
    auto* synth = app.add_subcommand("synth", "synthesize instances with known ideal noise");
    add_common(synth, common);
    synth->add_flag("--trace", with_trace, "include per-step noise traces");

    TrainArgs targs;
    auto* train = app.add_subcommand("train", "train a small MLP noise predictor on mixture samples");
    add_common(train, common, false);
    train->add_option("-m,--model", targs.model, "output parameter file");
    train->add_option("--epochs", targs.epochs, "training epochs")->capture_default_str();
    train->add_option("--lr", targs.lr, "SGD learning rate")->capture_default_str();
    train->add_option("--batch", targs.batch, "minibatch size")->capture_default_str();
    train->add_option("--samples", targs.samples, "training samples drawn from the mixture")->capture_default_str();
    train->add_option("--null-prob", targs.null_probability, "probability of dropping the label")->capture_default_str();
    train->add_option("--hidden", targs.hidden, "hidden layer widths");

    InvertArgs iargs;
    auto* invert = app.add_subcommand("invert", "invert one instance (or a latent file) with one method");
    add_common(invert, common);
    invert->add_option("-i,--instance", iargs.instance, "instance index")->capture_default_str();
    invert->add_option("-M,--method", iargs.method, "inversion method")->check(CLI::IsMember({"ddim", "picard", "spd", "dci"}));
    invert->add_option("--latent", iargs.latent, "z_0 JSON file instead of a synthesized instance");
    invert->add_option("--cond", iargs.cond, "conditioning for --latent: null, class:<k>, embedding:<v,...>");

    std::string rec_latent, rec_cond = "null";
    int from_t = -1;
    auto* recon = app.add_subcommand("reconstruct", "sample z_0 from a terminal latent");
    add_common(recon, common);
    recon->add_option("--latent", rec_latent, "z_T JSON file")->required();
    recon->add_option("--cond", rec_cond, "conditioning: null, class:<k>, embedding:<v,...>");
    recon->add_option("--from-t", from_t, "start timestep (default T)");

    int edit_instance = 0;
    std::string edit_target;
    auto* edit = app.add_subcommand("edit", "condition-swap edit of one instance");
    add_common(edit, common);
    edit->add_option("-i,--instance", edit_instance, "instance index")->capture_default_str();
    edit->add_option("--target", edit_target, "target conditioning (default: a component of another class)");

    auto* run = app.add_subcommand("run", "run every method on every instance");
    add_common(run, common);

    std::string sweep_param, sweep_values, sweep_method;
    auto* sweep = app.add_subcommand("sweep", "ablation over one config key");
    add_common(sweep, common);
    sweep->add_option("--param", sweep_param, "config key, e.g. inversion.eta");
    sweep->add_option("--values", sweep_values, "comma-separated values");
    sweep->add_option("--method", sweep_method, "method to sweep (sweep.method)");

    std::string plot_dir = "results";
    auto* plot = app.add_subcommand("plot", "write SVG plots for a results directory");
    plot->add_option("results", plot_dir, "results directory")->capture_default_str();

    std::string report_dir = "results";
    auto* report = app.add_subcommand("report", "print the summary of a results directory");
    report->add_option("results", report_dir, "results directory")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (*synth) return cmd_synth(common, with_trace);
        if (*train) return cmd_train(common, targs);
        if (*invert) return cmd_invert(common, iargs);
        if (*recon) return cmd_reconstruct(common, rec_latent, rec_cond, from_t);
        if (*edit) return cmd_edit(common, edit_instance, edit_target);
        if (*run) return cmd_run(common);
        if (*sweep) return cmd_sweep(common, sweep_param, sweep_values, sweep_method);
        if (*plot) return cmd_plot(plot_dir);
        if (*report) return cmd_report(report_dir);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitRuntime;
    }
    return kExitOk;
}
