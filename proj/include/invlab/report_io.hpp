// Copyright (C) 2026 The invlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "invlab/denoiser.hpp"
#include "invlab/inversion.hpp"
#include "invlab/latent.hpp"

namespace invlab {

// Per-run report as JSON lines: a header object followed by one object per
// timestep in processing order.
struct ReportFile {
    std::string method;
    int instance = 0;
    std::string config_hash;
    int total_iterations = 0;
    std::vector<TimestepRecord> steps;
};

void write_report(std::ostream& out, const InversionReport& report, int instance, const std::string& config_hash);
ReportFile read_report(std::istream& in);
ReportFile read_report(const std::filesystem::path& path);

// {"shape": [...], "values": [...]}
std::string latent_to_json(const Latent& z);
Latent latent_from_json(const std::string& text);
void save_latent(const std::filesystem::path& path, const Latent& z);
Latent load_latent(const std::filesystem::path& path);

// "null", "class:3" or "embedding:0.1,0.9".
std::string conditioning_spec(const Conditioning& c);
Conditioning parse_conditioning(const std::string& spec);

} // namespace invlab
