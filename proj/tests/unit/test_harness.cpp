// Copyright (C) 2026 The invlab Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "invlab/config.hpp"
#include "invlab/dataset.hpp"
#include "invlab/errors.hpp"
#include "invlab/experiment.hpp"
#include "invlab/plots.hpp"
#include "invlab/report_io.hpp"
#include "invlab/rng.hpp"

using namespace invlab;
namespace fs = std::filesystem;

namespace {

ExperimentConfig small_config() {
    KeyValues kv;
    kv.set("dataset.shape", "4");
    kv.set("dataset.instances", "6");
    kv.set("schedule.steps", "10");
    kv.set("output.reports", "true");
    return ExperimentConfig::from_keys(kv);
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("invlab_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST_SUITE("harness") {

TEST_CASE("rng streams depend only on seed and index") {
    Rng a(5), b(5);
    a.normals(100);
    CHECK(a.split(3).normals(4) == b.split(3).normals(4));
    CHECK(Rng(5).split(3).normals(4) != Rng(5).split(4).normals(4));
    CHECK(Rng(5).split(3).normals(4) != Rng(6).split(3).normals(4));
}

TEST_CASE("config file parsing and precedence") {
    std::istringstream in("# comment\nseed = 9\n\ninversion.lambda = 1.5  # trailing\nmethods = ddim, dci\n");
    const KeyValues kv = KeyValues::parse(in);
    CHECK(kv.get("seed") == "9");
    const auto cfg = ExperimentConfig::from_keys(kv);
    CHECK(cfg.seed == 9);
    CHECK(cfg.inversion.lambda == 1.5);
    CHECK(cfg.methods == std::vector<std::string>{"ddim", "dci"});

    std::istringstream bad("no equals sign\n");
    CHECK_THROWS_AS(KeyValues::parse(bad), ConfigError);

    const fs::path dir = scratch("config");
    {
        std::ofstream f(dir / "c.conf");
        f << "seed = 3\ninversion.K = 7\n";
    }
    ::setenv(kSeedEnvVar, "4", 1);
    auto c1 = load_config(dir / "c.conf", {});
    CHECK(c1.seed == 4);
    CHECK(c1.inversion.K == 7);
    auto c2 = load_config(dir / "c.conf", {"seed=5", "inversion.K=2"});
    CHECK(c2.seed == 5);
    CHECK(c2.inversion.K == 2);
    ::unsetenv(kSeedEnvVar);
    CHECK(load_config(dir / "c.conf", {}).seed == 3);
    CHECK(load_config(std::nullopt, {}).seed == ExperimentConfig{}.seed);
    CHECK_THROWS_AS(load_config(dir / "missing.conf", {}), ConfigError);
}

TEST_CASE("config rejects unknown keys and invalid values") {
    KeyValues kv;
    kv.set("inversion.lamda", "2");
    CHECK_THROWS_AS(ExperimentConfig::from_keys(kv), ConfigError);
    for (const auto& [k, v] : std::vector<std::pair<std::string, std::string>>{{"dataset.instances", "0"},
                                                                              {"inversion.K", "0"},
                                                                              {"inversion.eta", "abc"},
                                                                              {"methods", "ddim,nti"},
                                                                              {"dataset.shape", "4x4x4"},
                                                                              {"denoiser", "unet"},
                                                                              {"inversion.reference", "vae"},
                                                                              {"run.parallel", "maybe"}}) {
        KeyValues bad;
        bad.set(k, v);
        CHECK_THROWS_AS(ExperimentConfig::from_keys(bad), ConfigError);
    }
    KeyValues sweep;
    sweep.set("sweep.param", "inversion.eta");
    CHECK_THROWS_AS(ExperimentConfig::from_keys(sweep), ConfigError);
}

TEST_CASE("config round trip and stable hash") {
    const auto cfg = small_config();
    const auto back = ExperimentConfig::from_keys(cfg.to_keys());
    CHECK(back.canonical() == cfg.canonical());
    CHECK(back.hash() == cfg.hash());
    CHECK(cfg.hash().size() == 16);
    CHECK(cfg.hash("dci") != cfg.hash("spd"));
    KeyValues kv = cfg.to_keys();
    kv.set("output.dir", "/elsewhere");
    kv.set("run.threads", "3");
    CHECK(ExperimentConfig::from_keys(kv).hash() == cfg.hash());
    kv.set("inversion.eta", "0.01");
    CHECK(ExperimentConfig::from_keys(kv).hash() != cfg.hash());
    CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
}

TEST_CASE("synthesis is deterministic and matches its noise trace") {
    const auto cfg = small_config();
    const auto s = make_schedule(cfg.schedule);
    const auto den = make_denoiser(cfg, s);
    const auto a = synth_dataset(cfg.dataset, s, *den, 17);
    const auto b = synth_dataset(cfg.dataset, s, *den, 17);
    CHECK(a == b);
    CHECK(a != synth_dataset(cfg.dataset, s, *den, 18));
    for (const auto& inst : a) {
        REQUIRE(inst.eps_trace.size() == 10);
        // Re-noise with the recorded noise via exact per-step inversion.
        Latent z = inst.z0;
        for (int t = 1; t <= 10; ++t) z = ddim_invert_step_naive(z, inst.eps_trace[10 - t], s, t);
        CHECK(max_abs_diff(z, inst.z_T_star) <= 1e-9);
        // The constant forward noise lands on z_T* as well.
        Latent w = inst.z0;
        for (int t = 1; t <= 10; ++t) w = ddim_invert_step_naive(w, inst.eps_forward, s, t);
        CHECK(max_abs_diff(w, inst.z_T_star) <= 1e-9);
        CHECK(inst.prompt == Conditioning::null());
        CHECK(inst.ideal.kind() == ConditioningKind::Embedding);
        CHECK(inst.label == component_label(cfg.dataset, inst.component));
    }
    DatasetSpec none = cfg.dataset;
    none.instances = 0;
    CHECK_THROWS_AS(synth_dataset(none, s, *den, 1), ParameterError);
}

TEST_CASE("instance streams are independent of the instance count") {
    auto cfg = small_config();
    const auto s = make_schedule(cfg.schedule);
    const auto den = make_denoiser(cfg, s);
    const auto six = synth_dataset(cfg.dataset, s, *den, 2);
    cfg.dataset.instances = 3;
    const auto three = synth_dataset(cfg.dataset, s, *den, 2);
    for (int i = 0; i < 3; ++i) CHECK(six[static_cast<std::size_t>(i)] == three[static_cast<std::size_t>(i)]);
}

TEST_CASE("one method on one instance gives exactly one row") {
    KeyValues kv = small_config().to_keys();
    kv.set("dataset.instances", "1");
    kv.set("methods", "ddim");
    const auto r = run_experiment(ExperimentConfig::from_keys(kv));
    REQUIRE(r.rows.size() == 1);
    CHECK(r.rows[0].method == "ddim");
    CHECK(r.rows[0].iterations == 10);
    CHECK(r.errors.empty());
    CHECK(r.summary.size() == 1);
}

TEST_CASE("serial and parallel execution produce identical outputs") {
    const auto cfg = small_config();
    const auto serial = run_experiment(cfg, Execution::Serial);
    const auto parallel = run_experiment(cfg, Execution::Parallel);
    CHECK(results_csv(serial.rows) == results_csv(parallel.rows));
    CHECK(summary_json(serial) == summary_json(parallel));
    CHECK(serial.rows.size() == 6 * 4);
    const std::string csv = results_csv(serial.rows);
    CHECK(csv.rfind(std::string(kResultsHeader) + "\n", 0) == 0);
}

TEST_CASE("results files are byte-identical across runs") {
    const auto cfg = small_config();
    const fs::path a = scratch("run_a"), b = scratch("run_b");
    write_results(run_experiment(cfg), a);
    write_results(run_experiment(cfg), b);
    for (const char* f : {"results.csv", "summary.json", "errors.txt"}) CHECK(slurp(a / f) == slurp(b / f));
    CHECK(slurp(a / "errors.txt").empty());
    CHECK_FALSE(fs::exists(a / "timings.csv"));
    CHECK(fs::exists(a / "reports" / "dci_00000.jsonl"));
    const auto rep = read_report(a / "reports" / "dci_00000.jsonl");
    CHECK(rep.method == "dci");
    CHECK(rep.steps.size() == 10);
    CHECK(rep.config_hash == cfg.hash("dci"));
}

TEST_CASE("per-run failures are recorded without aborting the rest") {
    KeyValues kv = small_config().to_keys();
    kv.set("inversion.reference", "whitened");
    kv.set("dataset.shape", "1");
    kv.set("methods", "ddim,dci");
    const auto r = run_experiment(ExperimentConfig::from_keys(kv));
    // A one-dimensional latent cannot be whitened, so every dci run fails.
    CHECK(r.rows.size() == 6);
    CHECK(r.errors.size() == 6);
    CHECK(exit_status(r.errors) == 2);
    for (const auto& e : r.errors) CHECK(e.method == "dci");
}

TEST_CASE("sweeps") {
    KeyValues kv = small_config().to_keys();
    kv.set("sweep.param", "inversion.lambda");
    kv.set("sweep.values", "2,0");
    const auto cfg = ExperimentConfig::from_keys(kv);
    const auto sweep = run_sweep(cfg);
    REQUIRE(sweep.rows.size() == 2);
    CHECK(sweep.rows[0].value == "0");
    CHECK(sweep.rows[1].value == "2");

    // lambda = 0 reproduces the fixed-point-only baseline.
    const auto base = run_experiment(small_config());
    const auto& spd = *std::find_if(base.summary.begin(), base.summary.end(),
                                    [](const MethodSummary& m) { return m.method == "spd"; });
    CHECK(sweep.rows[0].summary.d_noi.median == spd.d_noi.median);
    CHECK(sweep.rows[0].summary.d_rec.median == spd.d_rec.median);
    const auto& dci = *std::find_if(base.summary.begin(), base.summary.end(),
                                    [](const MethodSummary& m) { return m.method == "dci"; });
    CHECK(sweep.rows[1].summary.d_rec.median == dci.d_rec.median);

    kv.set("sweep.values", "2");
    const auto single = run_sweep(ExperimentConfig::from_keys(kv));
    REQUIRE(single.rows.size() == 1);
    CHECK(single.rows[0].summary.d_noi.median == dci.d_noi.median);
    CHECK(single.rows[0].summary.iterations_mean == dci.iterations_mean);
    CHECK(ablation_csv(single).rfind(kAblationHeader, 0) == 0);

    CHECK_THROWS_AS(run_sweep(small_config()), ConfigError);
    kv.set("sweep.param", "output.dir");
    CHECK_THROWS_AS(run_sweep(ExperimentConfig::from_keys(kv)), ConfigError);
}

TEST_CASE("quartiles use linear interpolation") {
    const auto q = quartiles({4.0, 1.0, 3.0, 2.0});
    CHECK(q.q1 == doctest::Approx(1.75));
    CHECK(q.median == doctest::Approx(2.5));
    CHECK(q.q3 == doctest::Approx(3.25));
    CHECK(quartiles({7.0}).median == 7.0);
    CHECK_THROWS_AS(quartiles({}), ParameterError);
}

TEST_CASE("plots") {
    CHECK_THROWS_AS(emit_plots(scratch("plots_missing")), FileError);

    KeyValues kv = small_config().to_keys();
    kv.set("methods", "");
    const fs::path empty = scratch("plots_empty");
    write_results(run_experiment(ExperimentConfig::from_keys(kv)), empty);
    CHECK(emit_plots(empty).empty());
    CHECK_FALSE(fs::exists(empty / "plots"));

    kv.set("methods", "dci");
    kv.set("dataset.instances", "1");
    const auto cfg = ExperimentConfig::from_keys(kv);
    const fs::path one = scratch("plots_one");
    write_results(run_experiment(cfg), one);
    const auto written = emit_plots(one);
    REQUIRE(written.size() == 2);
    const std::string trace = slurp(one / "plots" / "trace_dci_00000.svg");
    CHECK(trace.find(cfg.hash("dci")) != std::string::npos);
    CHECK(trace.rfind("<svg", 0) == 0);
    const std::string strip = slurp(one / "plots" / "d_noi_strip.svg");
    emit_plots(one);
    CHECK(slurp(one / "plots" / "trace_dci_00000.svg") == trace);
    CHECK(slurp(one / "plots" / "d_noi_strip.svg") == strip);
}

TEST_CASE("latent and conditioning text round trips") {
    const Latent z(Shape::image(2, 2), {0.1, -2.5, 1e-300, 3.0});
    CHECK(latent_from_json(latent_to_json(z)) == z);
    CHECK_THROWS_AS(latent_from_json("{\"shape\":[3],\"values\":[1,2]}"), ShapeError);
    CHECK_THROWS_AS(latent_from_json("not json"), FileError);
    for (const auto& c : {Conditioning::null(), Conditioning::class_label(3), Conditioning::embedding({0.25, 0.75})}) {
        CHECK(parse_conditioning(conditioning_spec(c)) == c);
    }
    CHECK_THROWS_AS(parse_conditioning("prompt:cat"), ParameterError);
}

} // TEST_SUITE
