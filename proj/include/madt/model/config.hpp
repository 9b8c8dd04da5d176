#pragma once

#include <cstddef>
#include <map>
#include <string>

namespace madt::model {

/// Architecture hyperparameters. `d_model` is the hidden width shared by all
/// three streams; attention runs `heads` heads of width d_model / heads.
struct ModelConfig {
    std::size_t window = 100;
    std::size_t sensors = 7;
    std::size_t d_model = 64;
    std::size_t heads = 4;
    std::size_t layers = 2;
    std::size_t ff_mult = 4;
    double ln_eps = 1e-5;
    bool temporal_branch = true;
    bool spatial_branch = true;

    /// Throws ParameterError on inconsistent values.
    void validate() const;

    std::size_t head_width() const { return d_model / heads; }
    std::size_t ff_width() const { return ff_mult * d_model; }

    /// CPU-friendly defaults.
    static ModelConfig desk(std::size_t sensors, std::size_t window = 100);
    /// Large configuration: d=512, 8 heads, 3 layers.
    static ModelConfig large(std::size_t sensors, std::size_t window = 100);

    std::map<std::string, std::string> to_map() const;
    static ModelConfig from_map(const std::map<std::string, std::string>& kv);
};

/// Number of trainable scalars implied by `cfg` (disabled branches excluded).
std::size_t parameter_count(const ModelConfig& cfg);

}  // namespace madt::model
