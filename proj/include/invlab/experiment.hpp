// Copyright (C) 2026 The invlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "invlab/config.hpp"
#include "invlab/dataset.hpp"
#include "invlab/inversion.hpp"

namespace invlab {

struct ResultRow {
    int instance = 0;
    std::string method;
    std::string config_hash;
    std::uint64_t seed = 0;
    double d_noi = 0.0;
    double d_noi_rms = 0.0;
    double d_rec = 0.0;
    double psnr = 0.0;
    std::optional<double> ssim;
    int iterations = 0;
    double wall_time_s = 0.0;   // persisted only to timings.csv
};

struct RunError {
    int instance = 0;
    std::string method;
    std::string message;
};

struct Quartiles {
    double q1 = 0.0;
    double median = 0.0;
    double q3 = 0.0;
};

// Linear-interpolation quartiles; throws ParameterError on empty input.
Quartiles quartiles(std::vector<double> values);

struct MethodSummary {
    std::string method;
    std::string config_hash;
    int count = 0;
    Quartiles d_noi;
    Quartiles d_noi_rms;
    Quartiles d_rec;
    Quartiles psnr;
    std::optional<Quartiles> ssim;
    double iterations_mean = 0.0;
};

struct ExperimentResult {
    ExperimentConfig config;
    std::vector<ResultRow> rows;              // ordered by (instance, method list order)
    std::vector<InversionReport> reports;     // parallel to rows
    std::vector<RunError> errors;
    std::vector<MethodSummary> summary;       // method list order, methods with >= 1 row
};

enum class Execution { Serial, Parallel };

NoiseSchedule make_schedule(const ScheduleSpec& spec);

// gm-oracle: the dataset mixture; mlp:<path>: a saved network.
std::unique_ptr<Denoiser> make_denoiser(const ExperimentConfig& config, const NoiseSchedule& schedule);

// One method on one instance.
InversionReport run_method(const std::string& method, const Instance& instance, const NoiseSchedule& schedule,
                           const Denoiser& denoiser, const InversionConfig& inversion);

// Serial reference path and OpenMP path produce identical results.
ExperimentResult run_experiment(const ExperimentConfig& config, Execution execution);
ExperimentResult run_experiment(const ExperimentConfig& config);

std::vector<MethodSummary> summarize(const std::vector<ResultRow>& rows, const std::vector<std::string>& methods);

// results.csv, summary.json, errors.txt, reports/*.jsonl and, when enabled,
// timings.csv under `dir`.
void write_results(const ExperimentResult& result, const std::filesystem::path& dir);

inline constexpr const char* kResultsHeader = "instance,method,config_hash,seed,d_noi,d_noi_rms,d_rec,psnr,ssim,iterations";
std::string results_csv(const std::vector<ResultRow>& rows);
std::string summary_json(const ExperimentResult& result);

struct SweepRow {
    std::string value;
    ExperimentConfig config;
    MethodSummary summary;
    int errors = 0;
};

struct SweepResult {
    std::string param;
    std::vector<SweepRow> rows;               // sorted by numeric value
    std::vector<RunError> errors;
};

// One run_experiment per sweep value with the sweep method only; every other
// key keeps its configured value. Throws ConfigError without a sweep spec.
SweepResult run_sweep(const ExperimentConfig& config, Execution execution);
SweepResult run_sweep(const ExperimentConfig& config);

inline constexpr const char* kAblationHeader =
    "param,value,method,config_hash,n,errors,d_noi_q1,d_noi_median,d_noi_q3,d_rec_q1,d_rec_median,d_rec_q3,"
    "psnr_median,ssim_median,iterations_mean";
std::string ablation_csv(const SweepResult& sweep);
void write_sweep(const SweepResult& sweep, const std::filesystem::path& dir);

// 0 success, 2 when any run failed.
int exit_status(const std::vector<RunError>& errors);

} // namespace invlab
