// Copyright (C) 2026 The invlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "invlab/report_io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "invlab/config.hpp"
#include "invlab/errors.hpp"

namespace invlab {

using nlohmann::json;

namespace {

BreakReason parse_reason(const std::string& s) {
    if (s == "converged") return BreakReason::Converged;
    if (s == "max_rounds") return BreakReason::MaxRounds;
    if (s == "single_step") return BreakReason::SingleStep;
    throw FileError("report: unknown break reason '" + s + "'");
}

std::string read_all(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FileError("cannot read " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

void write_report(std::ostream& out, const InversionReport& report, int instance, const std::string& config_hash) {
    json header = {{"method", report.method},
                   {"instance", instance},
                   {"config_hash", config_hash},
                   {"total_iterations", report.total_iterations()},
                   {"timesteps", report.steps.size()}};
    out << header.dump() << '\n';
    for (const auto& s : report.steps) {
        json line = {{"t", s.t},
                     {"iterations", s.iterations},
                     {"reason", to_string(s.reason)},
                     {"l_ref", s.l_ref},
                     {"l_fix", s.l_fix}};
        out << line.dump() << '\n';
    }
}

ReportFile read_report(std::istream& in) {
    ReportFile rf;
    std::string line;
    if (!std::getline(in, line)) throw FileError("report: empty file");
    try {
        const json header = json::parse(line);
        rf.method = header.at("method").get<std::string>();
        rf.instance = header.at("instance").get<int>();
        rf.config_hash = header.at("config_hash").get<std::string>();
        rf.total_iterations = header.at("total_iterations").get<int>();
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const json j = json::parse(line);
            TimestepRecord s;
            s.t = j.at("t").get<int>();
            s.iterations = j.at("iterations").get<int>();
            s.reason = parse_reason(j.at("reason").get<std::string>());
            s.l_ref = j.at("l_ref").get<std::vector<double>>();
            s.l_fix = j.at("l_fix").get<std::vector<double>>();
            rf.steps.push_back(std::move(s));
        }
    } catch (const json::exception& e) {
        throw FileError(std::string("report: malformed JSON: ") + e.what());
    }
    return rf;
}

ReportFile read_report(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FileError("cannot read " + path.string());
    return read_report(in);
}

std::string latent_to_json(const Latent& z) {
    json j = {{"shape", z.shape().dims}, {"values", z.data()}};
    return j.dump();
}

Latent latent_from_json(const std::string& text) {
    try {
        const json j = json::parse(text);
        Shape shape{j.at("shape").get<std::vector<std::size_t>>()};
        return Latent(shape, j.at("values").get<std::vector<double>>());
    } catch (const json::exception& e) {
        throw FileError(std::string("latent: malformed JSON: ") + e.what());
    }
}

void save_latent(const std::filesystem::path& path, const Latent& z) {
    std::ofstream out(path);
    if (!out) throw FileError("cannot write " + path.string());
    out << latent_to_json(z) << '\n';
}

Latent load_latent(const std::filesystem::path& path) { return latent_from_json(read_all(path)); }

std::string conditioning_spec(const Conditioning& c) {
    switch (c.kind()) {
    case ConditioningKind::Null:
        return "null";
    case ConditioningKind::ClassLabel:
        return "class:" + std::to_string(c.label());
    case ConditioningKind::Embedding: {
        std::string out = "embedding:";
        const auto& e = c.embedding();
        for (std::size_t i = 0; i < e.size(); ++i) out += (i ? "," : "") + format_double(e[i]);
        return out;
    }
    }
    return "null";
}

Conditioning parse_conditioning(const std::string& spec) {
    if (spec == "null") return Conditioning::null();
    try {
        if (spec.rfind("class:", 0) == 0) return Conditioning::class_label(std::stoi(spec.substr(6)));
        if (spec.rfind("embedding:", 0) == 0) {
            std::vector<double> v;
            std::stringstream ss(spec.substr(10));
            std::string item;
            while (std::getline(ss, item, ',')) v.push_back(std::stod(item));
            return Conditioning::embedding(std::move(v));
        }
    } catch (const std::logic_error&) {
    }
    throw ParameterError("conditioning: expected null, class:<k> or embedding:<v,...>, got '" + spec + "'");
}

} // namespace invlab
