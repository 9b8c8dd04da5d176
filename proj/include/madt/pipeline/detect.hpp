#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "madt/diagnosis/diagnosis.hpp"
#include "madt/pipeline/data.hpp"
#include "madt/pipeline/synth.hpp"
#include "madt/pipeline/train.hpp"

namespace madt::pipeline {

/// Validation score streams kept in the checkpoint so thresholds can be
/// re-derived under a different rule without rescoring.
struct ScoreStreams {
    std::vector<double> point;     // every timestep of every window
    std::vector<double> sensor;    // every sensor of every window
    std::vector<double> temporal;  // every temporal-residual row of every window
};

struct Detector {
    TrainConfig config;
    TrainState model;
    AdamState adam;
    TrainLog log;
    NormStats norm;
    std::vector<std::string> sensor_names;
    diagnosis::Thresholds thresholds;
    ScoreStreams valid_scores;

    /// Re-derives the three thresholds from the stored validation streams.
    void recalibrate(const diagnosis::ThresholdParams& params);
};

void save_detector(const std::filesystem::path& path, const Detector& d);
Detector load_detector(const std::filesystem::path& path);

struct WindowOutput {
    diagnosis::AnomalyReport report;
    nd::Matrix temporal_residual;  // (T − T̃)∘², rows weighted
    nd::Matrix spatial_residual;   // (S − S̃)∘², rows weighted
};

/// Forward plus diagnosis for one prepared window.
WindowOutput diagnose(const TrainState& model, const PreparedWindow& w, const diagnosis::Thresholds& th);

ScoreStreams score_streams(const TrainState& model, const std::vector<PreparedWindow>& windows);

/// Splits off the validation tail, normalizes with training-split statistics,
/// trains and calibrates. Windows containing labelled anomalies are dropped
/// and reported through `warn`.
Detector fit_detector(const Series& train_series, const TrainConfig& cfg,
                      const std::function<void(const EpochRecord&)>& on_epoch = {},
                      const std::function<void(const std::string&)>& warn = {}, const Detector* resume = nullptr);

struct DetectedEvent {
    std::size_t id = 0;
    std::size_t start = 0;  // inclusive timeline index
    std::size_t end = 0;    // inclusive
    std::size_t duration_estimate = 0;
    std::size_t flagged_sensor_count = 0;
    std::size_t severity_rank = 0;  // 1 = most severe
    std::vector<double> sensor_scores;
    std::vector<std::size_t> sensor_ranking;
};

struct Detection {
    std::size_t covered = 0;  // ⌊T/w⌋·w
    std::vector<double> point_scores;
    std::vector<bool> point_flags;
    std::vector<double> temporal_scores;
    std::vector<bool> temporal_flags;
    std::vector<WindowOutput> windows;
    std::vector<DetectedEvent> events;
};

/// Scores a raw (unnormalized) series window by window and stitches a global
/// timeline. Events are runs of point or temporal flags, merged across gaps of
/// at most `event_gap` steps.
Detection run_detect(const Detector& d, const Series& raw, const diagnosis::Thresholds& th);

std::vector<DetectedEvent> extract_events(const std::vector<bool>& point_flags,
                                          const std::vector<bool>& temporal_flags,
                                          const std::vector<WindowOutput>& windows, std::size_t window,
                                          std::size_t gap);

struct EvalResult {
    diagnosis::Metrics point;  // point-adjusted
    std::size_t events_total = 0;
    std::size_t events_detected = 0;
    std::optional<double> recall_at_3;  // needs truth sensor sets
    double mean_duration_abs_err = 0;
    std::vector<std::optional<std::size_t>> matched;  // per truth event: detected event index
};

/// Labels cover at least the scored prefix; truth segments come from the
/// labels unless `truth` is given.
EvalResult evaluate_detection(const std::vector<bool>& point_flags, const std::vector<DetectedEvent>& events,
                              const std::vector<int>& labels, const std::vector<TruthEvent>* truth);

std::string format_metrics(const EvalResult& r);

/// points.csv, sensors.csv, events.csv, event_rankings.csv, residuals.madt.
void write_reports(const std::filesystem::path& dir, const Detection& det, const std::vector<std::string>& names);

struct ReportFiles {
    std::vector<double> point_scores;
    std::vector<bool> point_flags;
    std::vector<DetectedEvent> events;
};

ReportFiles read_reports(const std::filesystem::path& dir);

}  // namespace madt::pipeline
