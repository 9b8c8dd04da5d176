#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "madt/pipeline/data.hpp"

namespace madt::pipeline {

enum class InjectionKind { offset, stuck };

struct Injection {
    std::size_t start = 0;
    std::size_t duration = 0;
    std::vector<std::size_t> sensors;
    double magnitude = 3.0;  // offset in units of the sensor's clean std
    InjectionKind kind = InjectionKind::offset;
};

/// Two-tank plant: pump inflow into tank 1, gravity flow to tank 2, valve-controlled
/// outflow. Seven channels: level1, level2, inflow, transfer, outflow, valve, temperature.
struct SynthSpec {
    std::size_t sensors = 7;
    std::size_t length = 36000;
    double noise = 0.05;            // measurement noise, fraction of each channel's clean std
    double disturbance = 0.002;     // inflow AR(1) disturbance scale
    std::uint64_t seed = 7;
    std::size_t train_length = 0;   // rows emitted as the clean training file; 0 = no split
    std::vector<Injection> injections;

    /// Throws ParameterError on out-of-range or overlapping injections.
    void validate() const;
};

struct TruthEvent {
    std::size_t start = 0;
    std::size_t duration = 0;
    std::vector<std::size_t> sensors;
};

struct SynthResult {
    Series series;  // labelled
    std::vector<TruthEvent> events;
};

SynthResult synth_generate(const SynthSpec& spec);

/// The duration case study: `train_length` clean steps followed by a
/// `test_length` segment with six events of durations 10..60, two sensors each,
/// each wholly inside one window of length `window`.
struct CaseStudy {
    std::size_t train_length = 30000;
    std::size_t test_length = 6000;
    std::size_t window = 100;
    double magnitude = 3.0;
    std::uint64_t seed = 7;

    SynthSpec spec() const;
};

struct SplitDataset {
    Series train;
    Series test;
    std::vector<TruthEvent> test_events;  // indices relative to the test series
};

SplitDataset make_case_study(const CaseStudy& cs);

/// Generates and splits at spec.train_length (test event indices are rebased).
SplitDataset generate_split(const SynthSpec& spec);

/// Reads a flat key=value SynthSpec. Injections use
/// `inject = start,duration,sensor;sensor,magnitude[,offset|stuck]`.
SynthSpec parse_synth_spec(const std::string& text);

void save_truth_events(const std::string& path, const std::vector<TruthEvent>& events);
std::vector<TruthEvent> load_truth_events(const std::string& path);

}  // namespace madt::pipeline
