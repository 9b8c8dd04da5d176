#include "madt/pipeline/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "madt/errors.hpp"

namespace madt::pipeline {
namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
}

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys = {
        "profile", "window", "d_model", "heads", "layers", "ff_mult", "ln_eps", "temporal_branch", "spatial_branch",
        "batch", "lr", "max_epochs", "patience", "lambda", "use_align", "seed", "valid_fraction", "tau_t", "tau_s",
        "event_gap", "threshold_rule", "r", "beta", "sensors"};
    return keys;
}

}  // namespace

KeyValues parse_key_values(const std::string& text) {
    KeyValues kv;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError("expected key = value", lineno);
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ParseError("empty key", lineno);
        if (key == "inject" && kv.count(key))
            kv[key] += "\n" + value;
        else
            kv[key] = value;
    }
    return kv;
}

KeyValues load_key_values(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw InputError("cannot open config " + path.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_key_values(ss.str());
}

std::size_t kv_size(const KeyValues& kv, const std::string& key, std::size_t fallback) {
    auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    try {
        std::size_t pos = 0;
        const long long v = std::stoll(it->second, &pos);
        if (pos != it->second.size() || v < 0) throw std::invalid_argument("");
        return std::size_t(v);
    } catch (const std::exception&) {
        throw ConfigError("'" + key + "' must be a non-negative integer, got '" + it->second + "'");
    }
}

double kv_double(const KeyValues& kv, const std::string& key, double fallback) {
    auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    try {
        std::size_t pos = 0;
        const double v = std::stod(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument("");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("'" + key + "' must be a number, got '" + it->second + "'");
    }
}

bool kv_bool(const KeyValues& kv, const std::string& key, bool fallback) {
    auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    const auto& v = it->second;
    if (v == "1" || v == "true" || v == "on" || v == "yes") return true;
    if (v == "0" || v == "false" || v == "off" || v == "no") return false;
    throw ConfigError("'" + key + "' must be a boolean, got '" + v + "'");
}

std::uint64_t kv_u64(const KeyValues& kv, const std::string& key, std::uint64_t fallback) {
    auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    try {
        std::size_t pos = 0;
        const auto v = std::stoull(it->second, &pos);
        if (pos != it->second.size() || it->second.front() == '-') throw std::invalid_argument("");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("'" + key + "' must be an unsigned integer, got '" + it->second + "'");
    }
}

void TrainConfig::validate() const {
    model.validate();
    if (batch == 0) throw ConfigError("batch must be positive");
    if (!(lr > 0)) throw ConfigError("lr must be positive");
    if (max_epochs == 0) throw ConfigError("max_epochs must be positive");
    if (lambda < 0) throw ConfigError("lambda must be >= 0");
    if (!(valid_fraction > 0 && valid_fraction < 1)) throw ConfigError("valid_fraction must lie in (0, 1)");
    if (tau_t < 0 || tau_s < 0) throw ConfigError("tau_t and tau_s must be >= 0");
    threshold.validate();
}

TrainConfig TrainConfig::large(std::size_t sensors) {
    TrainConfig c;
    c.model = model::ModelConfig::large(sensors);
    return c;
}

TrainConfig TrainConfig::desk(std::size_t sensors) {
    TrainConfig c;
    c.model = model::ModelConfig::desk(sensors);
    c.batch = 8;
    c.lr = 1e-3;
    return c;
}

KeyValues TrainConfig::to_map() const {
    KeyValues kv = model.to_map();
    kv["batch"] = std::to_string(batch);
    kv["lr"] = fmt_double(lr);
    kv["max_epochs"] = std::to_string(max_epochs);
    kv["patience"] = std::to_string(patience);
    kv["lambda"] = fmt_double(lambda);
    kv["seed"] = std::to_string(seed);
    kv["valid_fraction"] = fmt_double(valid_fraction);
    kv["tau_t"] = fmt_double(tau_t);
    kv["tau_s"] = fmt_double(tau_s);
    kv["event_gap"] = std::to_string(event_gap);
    kv["threshold_rule"] = diagnosis::rule_name(threshold.rule);
    kv["r"] = fmt_double(threshold.r);
    kv["beta"] = fmt_double(threshold.beta);
    return kv;
}

TrainConfig TrainConfig::from_map(const KeyValues& kv, std::size_t sensors) {
    for (const auto& [k, v] : kv)
        if (!known_keys().count(k)) throw ConfigError("unknown config key '" + k + "'");
    const std::string profile = kv.count("profile") ? kv.at("profile") : "desk";
    TrainConfig c;
    if (profile == "desk")
        c = desk(sensors);
    else if (profile == "large")
        c = large(sensors);
    else
        throw ConfigError("profile must be desk or large, got '" + profile + "'");

    auto& m = c.model;
    m.sensors = kv_size(kv, "sensors", sensors);
    m.window = kv_size(kv, "window", m.window);
    m.d_model = kv_size(kv, "d_model", m.d_model);
    m.heads = kv_size(kv, "heads", m.heads);
    m.layers = kv_size(kv, "layers", m.layers);
    m.ff_mult = kv_size(kv, "ff_mult", m.ff_mult);
    m.ln_eps = kv_double(kv, "ln_eps", m.ln_eps);
    m.temporal_branch = kv_bool(kv, "temporal_branch", m.temporal_branch);
    m.spatial_branch = kv_bool(kv, "spatial_branch", m.spatial_branch);

    c.batch = kv_size(kv, "batch", c.batch);
    c.lr = kv_double(kv, "lr", c.lr);
    c.max_epochs = kv_size(kv, "max_epochs", c.max_epochs);
    c.patience = kv_size(kv, "patience", c.patience);
    c.lambda = kv_double(kv, "lambda", c.lambda);
    if (!kv_bool(kv, "use_align", true)) c.lambda = 0;
    c.seed = kv_u64(kv, "seed", c.seed);
    c.valid_fraction = kv_double(kv, "valid_fraction", c.valid_fraction);
    c.tau_t = kv_double(kv, "tau_t", c.tau_t);
    c.tau_s = kv_double(kv, "tau_s", c.tau_s);
    c.event_gap = kv_size(kv, "event_gap", c.event_gap);
    if (kv.count("threshold_rule")) c.threshold.rule = diagnosis::parse_rule(kv.at("threshold_rule"));
    c.threshold.r = kv_double(kv, "r", c.threshold.r);
    c.threshold.beta = kv_double(kv, "beta", c.threshold.beta);
    try {
        c.validate();
    } catch (const ParameterError& e) {
        throw ConfigError(e.what());
    }
    return c;
}

}  // namespace madt::pipeline
