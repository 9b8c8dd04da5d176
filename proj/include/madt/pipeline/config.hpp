#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "madt/diagnosis/diagnosis.hpp"
#include "madt/model/config.hpp"

namespace madt::pipeline {

using KeyValues = std::map<std::string, std::string>;

/// `key = value` lines; `#` starts a comment. Duplicate keys keep the last
/// value except `inject`, whose values are joined with '\n'.
KeyValues parse_key_values(const std::string& text);
KeyValues load_key_values(const std::filesystem::path& path);

std::size_t kv_size(const KeyValues& kv, const std::string& key, std::size_t fallback);
double kv_double(const KeyValues& kv, const std::string& key, double fallback);
bool kv_bool(const KeyValues& kv, const std::string& key, bool fallback);
std::uint64_t kv_u64(const KeyValues& kv, const std::string& key, std::uint64_t fallback);

struct TrainConfig {
    model::ModelConfig model;
    std::size_t batch = 64;
    double lr = 1e-4;
    std::size_t max_epochs = 10;
    std::size_t patience = 3;
    double lambda = 19.0;
    std::uint64_t seed = 0;
    double valid_fraction = 0.2;
    double tau_t = 0;  // 0 selects the sensor count
    double tau_s = 0;  // 0 selects the window length
    std::size_t event_gap = 5;
    diagnosis::ThresholdParams threshold;

    void validate() const;

    /// Large configuration (d=512, h=8, K=3, batch 64, lr 1e-4).
    static TrainConfig large(std::size_t sensors);
    /// CPU-sized profile (d=64, h=4, K=2).
    static TrainConfig desk(std::size_t sensors);

    KeyValues to_map() const;
    /// Unknown keys raise ConfigError. `profile = desk|large` picks the base.
    static TrainConfig from_map(const KeyValues& kv, std::size_t sensors);
};

}  // namespace madt::pipeline
