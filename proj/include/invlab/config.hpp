// Copyright (C) 2026 The invlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "invlab/inversion.hpp"
#include "invlab/latent.hpp"

namespace invlab {

// Flat `key = value` text. '#' starts a comment, blank lines are skipped.
class KeyValues {
public:
    static KeyValues parse(std::istream& in, const std::string& source = "<input>");
    static KeyValues parse_file(const std::filesystem::path& path);

    void set(const std::string& key, const std::string& value) { entries_[key] = value; }
    // "key=value"; throws ConfigError on a missing '='.
    void set_assignment(const std::string& assignment);
    void merge(const KeyValues& other);

    bool has(const std::string& key) const { return entries_.count(key) != 0; }
    const std::string& get(const std::string& key) const;
    const std::map<std::string, std::string>& entries() const { return entries_; }

private:
    std::map<std::string, std::string> entries_;
};

struct DatasetSpec {
    Shape shape = Shape::image(16, 16);
    int classes = 2;
    int components_per_class = 4;
    double class_spread = 1.0;      // std of per-class base means
    double component_spread = 0.1;  // std of component offsets around their class base
    double sigma0 = 0.1;            // per-component std of z_0
    int instances = 100;
    std::string ideal = "component";  // conditioning used to generate: component | class
    std::string prompt = "null";      // conditioning used to invert: null | class | component
    double dynamic_range = 6.0;       // PSNR peak and SSIM range

    int components() const { return classes * components_per_class; }
};

struct ScheduleSpec {
    int steps = 50;
    double beta_start = 1e-4;
    double beta_end = 0.02;
};

struct SweepSpec {
    std::string param;              // any numeric config key, e.g. inversion.eta
    std::vector<std::string> values;
    std::string method = "dci";
};

struct ExperimentConfig {
    std::uint64_t seed = 1;
    ScheduleSpec schedule;
    DatasetSpec dataset;
    std::string denoiser = "gm-oracle";   // or mlp:<path>
    std::vector<std::string> methods = {"ddim", "picard", "spd", "dci"};
    InversionConfig inversion;
    SweepSpec sweep;

    std::filesystem::path output_dir = "results";
    bool timing = false;     // write timings.csv
    bool reports = true;     // write reports/*.jsonl
    bool parallel = true;
    int threads = 0;         // 0 = OpenMP default

    // Throws ConfigError for unknown keys or unparsable values.
    static ExperimentConfig from_keys(const KeyValues& keys);
    KeyValues to_keys() const;

    // Keys that can change results, one per line in key order.
    std::string canonical() const;
    // 16 hex digits, FNV-1a over canonical() and `salt`.
    std::string hash(const std::string& salt = "") const;

    void validate() const;   // throws ConfigError
};

inline constexpr const char* kSeedEnvVar = "INVLAB_SEED";

// defaults < file < INVLAB_SEED < overrides ("key=value").
ExperimentConfig load_config(const std::optional<std::filesystem::path>& file,
                             const std::vector<std::string>& overrides);

Shape parse_shape(const std::string& s);   // "16x16" or "8"
std::string format_double(double x);        // shortest round-trip text
std::uint64_t fnv1a(const std::string& s);

} // namespace invlab
