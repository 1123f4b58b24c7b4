// Copyright (C) 2026 The invlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "invlab/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "invlab/errors.hpp"

namespace invlab {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + items[i];
    return out;
}

double to_double(const std::string& key, const std::string& v) {
    double x = 0.0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(x)) {
        throw ConfigError(key + ": expected a number, got '" + v + "'");
    }
    return x;
}

long long to_int(const std::string& key, const std::string& v) {
    long long x = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (ec != std::errc() || ptr != v.data() + v.size()) {
        throw ConfigError(key + ": expected an integer, got '" + v + "'");
    }
    return x;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
    std::uint64_t x = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (ec != std::errc() || ptr != v.data() + v.size()) {
        throw ConfigError(key + ": expected an unsigned integer, got '" + v + "'");
    }
    return x;
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError(key + ": expected a boolean, got '" + v + "'");
}

std::string shape_text(const Shape& s) {
    std::string out;
    for (std::size_t i = 0; i < s.dims.size(); ++i) out += (i ? "x" : "") + std::to_string(s.dims[i]);
    return out;
}

const char* bool_text(bool b) { return b ? "true" : "false"; }

// Keys excluded from canonical(): they never change a numeric result.
bool is_operational(const std::string& key) {
    return key.rfind("output.", 0) == 0 || key.rfind("run.", 0) == 0 || key.rfind("sweep.", 0) == 0;
}

} // namespace

KeyValues KeyValues::parse(std::istream& in, const std::string& source) {
    KeyValues kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(source + ":" + std::to_string(lineno) + ": expected 'key = value'");
        }
        const std::string key = trim(line.substr(0, eq));
        if (key.empty()) throw ConfigError(source + ":" + std::to_string(lineno) + ": empty key");
        kv.set(key, trim(line.substr(eq + 1)));
    }
    return kv;
}

KeyValues KeyValues::parse_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    return parse(in, path.string());
}

void KeyValues::set_assignment(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || trim(assignment.substr(0, eq)).empty()) {
        throw ConfigError("override '" + assignment + "': expected key=value");
    }
    set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void KeyValues::merge(const KeyValues& other) {
    for (const auto& [k, v] : other.entries_) entries_[k] = v;
}

const std::string& KeyValues::get(const std::string& key) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) throw ConfigError("missing key " + key);
    return it->second;
}

Shape parse_shape(const std::string& s) {
    std::vector<std::size_t> dims;
    std::stringstream ss(s);
    std::string part;
    while (std::getline(ss, part, 'x')) {
        const long long n = to_int("dataset.shape", trim(part));
        if (n < 1) throw ConfigError("dataset.shape: dimensions must be >= 1, got '" + s + "'");
        dims.push_back(static_cast<std::size_t>(n));
    }
    if (dims.empty() || dims.size() > 2) throw ConfigError("dataset.shape: expected N or HxW, got '" + s + "'");
    return Shape{dims};
}

std::string format_double(double x) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, ptr);
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

KeyValues ExperimentConfig::to_keys() const {
    KeyValues kv;
    kv.set("seed", std::to_string(seed));
    kv.set("schedule.steps", std::to_string(schedule.steps));
    kv.set("schedule.beta_start", format_double(schedule.beta_start));
    kv.set("schedule.beta_end", format_double(schedule.beta_end));
    kv.set("dataset.shape", shape_text(dataset.shape));
    kv.set("dataset.classes", std::to_string(dataset.classes));
    kv.set("dataset.components_per_class", std::to_string(dataset.components_per_class));
    kv.set("dataset.class_spread", format_double(dataset.class_spread));
    kv.set("dataset.component_spread", format_double(dataset.component_spread));
    kv.set("dataset.sigma0", format_double(dataset.sigma0));
    kv.set("dataset.instances", std::to_string(dataset.instances));
    kv.set("dataset.ideal", dataset.ideal);
    kv.set("dataset.prompt", dataset.prompt);
    kv.set("dataset.dynamic_range", format_double(dataset.dynamic_range));
    kv.set("denoiser", denoiser);
    kv.set("methods", join(methods));
    kv.set("inversion.K", std::to_string(inversion.K));
    kv.set("inversion.lambda", format_double(inversion.lambda));
    kv.set("inversion.eta", format_double(inversion.eta));
    kv.set("inversion.delta", format_double(inversion.delta));
    kv.set("inversion.cfg_scale", format_double(inversion.cfg_scale));
    kv.set("inversion.carry_forward", bool_text(inversion.carry_forward));
    kv.set("inversion.corrected_fix", bool_text(inversion.corrected_fix));
    kv.set("inversion.reference", to_string(inversion.reference_mode));
    kv.set("sweep.param", sweep.param);
    kv.set("sweep.values", join(sweep.values));
    kv.set("sweep.method", sweep.method);
    kv.set("output.dir", output_dir.string());
    kv.set("output.timing", bool_text(timing));
    kv.set("output.reports", bool_text(reports));
    kv.set("run.parallel", bool_text(parallel));
    kv.set("run.threads", std::to_string(threads));
    return kv;
}

ExperimentConfig ExperimentConfig::from_keys(const KeyValues& keys) {
    ExperimentConfig c;
    const KeyValues known = c.to_keys();
    for (const auto& [k, v] : keys.entries()) {
        if (!known.has(k)) throw ConfigError("unknown config key '" + k + "'");
    }
    KeyValues kv = known;
    kv.merge(keys);
    auto num = [&](const char* k) { return to_double(k, kv.get(k)); };
    auto integer = [&](const char* k) {
        const long long x = to_int(k, kv.get(k));
        if (x < -1000000000LL || x > 1000000000LL) throw ConfigError(std::string(k) + ": out of range");
        return static_cast<int>(x);
    };
    auto flag = [&](const char* k) { return to_bool(k, kv.get(k)); };

    c.seed = to_u64("seed", kv.get("seed"));
    c.schedule.steps = integer("schedule.steps");
    c.schedule.beta_start = num("schedule.beta_start");
    c.schedule.beta_end = num("schedule.beta_end");
    c.dataset.shape = parse_shape(kv.get("dataset.shape"));
    c.dataset.classes = integer("dataset.classes");
    c.dataset.components_per_class = integer("dataset.components_per_class");
    c.dataset.class_spread = num("dataset.class_spread");
    c.dataset.component_spread = num("dataset.component_spread");
    c.dataset.sigma0 = num("dataset.sigma0");
    c.dataset.instances = integer("dataset.instances");
    c.dataset.ideal = kv.get("dataset.ideal");
    c.dataset.prompt = kv.get("dataset.prompt");
    c.dataset.dynamic_range = num("dataset.dynamic_range");
    c.denoiser = kv.get("denoiser");
    c.methods = split_list(kv.get("methods"));
    c.inversion.K = integer("inversion.K");
    c.inversion.lambda = num("inversion.lambda");
    c.inversion.eta = num("inversion.eta");
    c.inversion.delta = num("inversion.delta");
    c.inversion.cfg_scale = num("inversion.cfg_scale");
    c.inversion.carry_forward = flag("inversion.carry_forward");
    c.inversion.corrected_fix = flag("inversion.corrected_fix");
    try {
        c.inversion.reference_mode = parse_reference_mode(kv.get("inversion.reference"));
    } catch (const ParameterError& e) {
        throw ConfigError(std::string("inversion.reference: ") + e.what());
    }
    c.sweep.param = kv.get("sweep.param");
    c.sweep.values = split_list(kv.get("sweep.values"));
    c.sweep.method = kv.get("sweep.method");
    c.output_dir = kv.get("output.dir");
    c.timing = flag("output.timing");
    c.reports = flag("output.reports");
    c.parallel = flag("run.parallel");
    c.threads = integer("run.threads");
    c.validate();
    return c;
}

void ExperimentConfig::validate() const {
    auto fail = [](const std::string& m) { throw ConfigError(m); };
    if (schedule.steps < 1) fail("schedule.steps must be >= 1");
    if (!(schedule.beta_start > 0.0 && schedule.beta_end < 1.0 && schedule.beta_start <= schedule.beta_end)) {
        fail("schedule: need 0 < beta_start <= beta_end < 1");
    }
    if (dataset.instances < 1) fail("dataset.instances must be >= 1");
    if (dataset.classes < 1 || dataset.components_per_class < 1) fail("dataset: need >= 1 class and component");
    if (!(dataset.sigma0 > 0.0)) fail("dataset.sigma0 must be > 0");
    if (dataset.class_spread < 0.0 || dataset.component_spread < 0.0) fail("dataset spreads must be >= 0");
    if (!(dataset.dynamic_range > 0.0)) fail("dataset.dynamic_range must be > 0");
    if (dataset.ideal != "component" && dataset.ideal != "class") fail("dataset.ideal: expected component|class");
    if (dataset.prompt != "null" && dataset.prompt != "class" && dataset.prompt != "component") {
        fail("dataset.prompt: expected null|class|component");
    }
    if (denoiser != "gm-oracle" && denoiser.rfind("mlp:", 0) != 0) fail("denoiser: expected gm-oracle or mlp:<path>");
    for (const auto& m : methods) {
        if (m != "ddim" && m != "picard" && m != "spd" && m != "dci") fail("methods: unknown method '" + m + "'");
    }
    try {
        inversion.validate();
    } catch (const ParameterError& e) {
        fail(std::string("inversion: ") + e.what());
    }
    if (!sweep.param.empty()) {
        if (sweep.values.empty()) fail("sweep.values must be nonempty when sweep.param is set");
        if (sweep.method != "ddim" && sweep.method != "picard" && sweep.method != "spd" && sweep.method != "dci") {
            fail("sweep.method: unknown method '" + sweep.method + "'");
        }
    }
    if (threads < 0) fail("run.threads must be >= 0");
}

std::string ExperimentConfig::canonical() const {
    std::string out;
    const KeyValues keys = to_keys();
    for (const auto& [k, v] : keys.entries()) {
        if (!is_operational(k)) out += k + "=" + v + "\n";
    }
    return out;
}

std::string ExperimentConfig::hash(const std::string& salt) const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(canonical() + salt)));
    return buf;
}

ExperimentConfig load_config(const std::optional<std::filesystem::path>& file,
                             const std::vector<std::string>& overrides) {
    KeyValues kv;
    if (file) kv.merge(KeyValues::parse_file(*file));
    if (const char* env = std::getenv(kSeedEnvVar); env && *env) kv.set("seed", env);
    for (const auto& o : overrides) kv.set_assignment(o);
    return ExperimentConfig::from_keys(kv);
}

} // namespace invlab
