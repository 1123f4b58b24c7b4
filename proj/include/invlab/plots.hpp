// Copyright (C) 2026 The invlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "invlab/report_io.hpp"

namespace invlab {

struct StripPoint {
    std::string method;
    double value = 0.0;
};

// Loss trace of one run: log10 L_fix against the cumulative evaluation index,
// timestep boundaries drawn as faint rules.
std::string trace_svg(const ReportFile& report);

// One column of points per method, in order of first appearance.
std::string strip_svg(const std::vector<StripPoint>& points, const std::string& title);

// Reads results.csv and reports/*.jsonl under `results_dir` and writes
// plots/trace_<method>_<instance>.svg plus plots/d_noi_strip.svg. Writes
// nothing when results.csv has no rows. Throws FileError when results.csv is
// missing. Returns the written paths in sorted order.
std::vector<std::filesystem::path> emit_plots(const std::filesystem::path& results_dir);

} // namespace invlab
