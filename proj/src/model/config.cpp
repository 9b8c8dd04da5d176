#include "madt/model/config.hpp"

#include <cstdio>
#include <string>

#include "madt/errors.hpp"

namespace madt::model {
namespace {

std::size_t get_size(const std::map<std::string, std::string>& kv, const std::string& key, std::size_t fallback) {
    auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    try {
        return std::stoul(it->second);
    } catch (const std::exception&) {
        throw ConfigError("model config: '" + key + "' is not an unsigned integer: " + it->second);
    }
}

}  // namespace

void ModelConfig::validate() const {
    if (window < 2) throw ParameterError("window must be >= 2");
    if (sensors < 2) throw ParameterError("sensor count must be >= 2");
    if (d_model == 0 || heads == 0) throw ParameterError("d_model and heads must be positive");
    if (d_model % heads != 0)
        throw ParameterError("d_model (" + std::to_string(d_model) + ") must be divisible by heads (" +
                             std::to_string(heads) + ")");
    if (layers < 1) throw ParameterError("at least one layer is required");
    if (ff_mult < 1) throw ParameterError("ff_mult must be >= 1");
    if (!(ln_eps > 0)) throw ParameterError("ln_eps must be positive");
}

ModelConfig ModelConfig::desk(std::size_t sensors, std::size_t window) {
    ModelConfig c;
    c.sensors = sensors;
    c.window = window;
    c.d_model = 64;
    c.heads = 4;
    c.layers = 2;
    return c;
}

ModelConfig ModelConfig::large(std::size_t sensors, std::size_t window) {
    ModelConfig c;
    c.sensors = sensors;
    c.window = window;
    c.d_model = 512;
    c.heads = 8;
    c.layers = 3;
    return c;
}

std::map<std::string, std::string> ModelConfig::to_map() const {
    char eps[64];
    std::snprintf(eps, sizeof eps, "%.17g", ln_eps);
    return {{"window", std::to_string(window)},
            {"sensors", std::to_string(sensors)},
            {"d_model", std::to_string(d_model)},
            {"heads", std::to_string(heads)},
            {"layers", std::to_string(layers)},
            {"ff_mult", std::to_string(ff_mult)},
            {"ln_eps", eps},
            {"temporal_branch", temporal_branch ? "1" : "0"},
            {"spatial_branch", spatial_branch ? "1" : "0"}};
}

ModelConfig ModelConfig::from_map(const std::map<std::string, std::string>& kv) {
    ModelConfig c;
    c.window = get_size(kv, "window", c.window);
    c.sensors = get_size(kv, "sensors", c.sensors);
    c.d_model = get_size(kv, "d_model", c.d_model);
    c.heads = get_size(kv, "heads", c.heads);
    c.layers = get_size(kv, "layers", c.layers);
    c.ff_mult = get_size(kv, "ff_mult", c.ff_mult);
    if (auto it = kv.find("ln_eps"); it != kv.end()) c.ln_eps = std::stod(it->second);
    c.temporal_branch = get_size(kv, "temporal_branch", 1) != 0;
    c.spatial_branch = get_size(kv, "spatial_branch", 1) != 0;
    c.validate();
    return c;
}

std::size_t parameter_count(const ModelConfig& cfg) {
    const std::size_t d = cfg.d_model;
    const std::size_t f = cfg.ff_width();
    const std::size_t w = cfg.window;
    const std::size_t n = cfg.sensors;
    auto encoder = [d](std::size_t in) { return in * d + d + 2 * (d * d + d); };
    // 3 Q/K/V + affine output + two norms + two-layer MLP
    const std::size_t layer_branch = 3 * d * d + (d * d + d) + 2 * (2 * d) + (d * f + f) + (f * d + d);

    std::size_t total = encoder(n) + cfg.layers * layer_branch + (d * n + n);
    if (cfg.temporal_branch) total += encoder(w) + cfg.layers * layer_branch + (d * w + w);
    if (cfg.spatial_branch) total += encoder(n) + cfg.layers * layer_branch + (d * n + n);
    return total;
}

}  // namespace madt::model
