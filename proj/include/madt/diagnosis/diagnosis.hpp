#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "madt/model/forward.hpp"
#include "madt/ndgrad/tensor.hpp"

namespace madt::diagnosis {

/// softmax(−v) over all entries of v.
std::vector<double> softmax_neg(const std::vector<double>& v);

/// Per-timestep score ‖x_t − x̃_t‖² · softmax(−Align(Seri, Temp))_t. Without
/// temporal maps the weighting is uniform (1/w).
std::vector<double> anomaly_score(const nd::Matrix& x, const model::ForwardOutput& out);

struct Localization {
    std::vector<double> scores;        // per sensor
    std::vector<std::size_t> ranking;  // sensor indices, highest score first, ties by index
};

/// Row sums of (S − S̃)∘², row i weighted by softmax(−rowwise Align(Space, Seri))_i.
Localization localize(const nd::Matrix& s, const nd::Matrix& s_rec, const model::AssociationMaps& maps);

/// Indices sorted by descending score; equal scores keep ascending index.
std::vector<std::size_t> rank_descending(const std::vector<double>& scores);

/// Row sums of (T − T̃)∘², row i weighted by softmax(−Align(Seri, Temp))_i.
std::vector<double> temporal_row_errors(const nd::Matrix& t, const nd::Matrix& t_rec,
                                        const model::AssociationMaps& maps);

struct Severity {
    std::vector<double> row_errors;
    std::vector<bool> flagged;
    std::size_t duration = 0;
};

Severity severity(const nd::Matrix& t, const nd::Matrix& t_rec, const model::AssociationMaps& maps,
                  double delta_temporal);

// ---- thresholds ----------------------------------------------------------------

enum class ThresholdRule { ratio, beta_max };

ThresholdRule parse_rule(const std::string& s);
std::string rule_name(ThresholdRule r);

struct ThresholdParams {
    ThresholdRule rule = ThresholdRule::beta_max;
    double r = 0.01;     // ratio rule: fraction of validation points above threshold
    double beta = 1.5;   // beta_max rule, in [1, 2]
    void validate() const;
};

struct Thresholds {
    ThresholdParams params;
    double delta_point = 0;
    double delta_sensor = 0;
    double delta_temporal = 0;
};

/// Threshold for one validation stream. ratio: the ⌈(1−r)·N⌉-th order
/// statistic, so that a fraction r lies strictly above it. beta_max: β·max.
double calibrate(const std::vector<double>& valid_scores, const ThresholdParams& params);

/// β on a 0.05 grid over [1, 2] maximising point-adjusted F1 on labelled
/// validation scores; ties resolve to the smallest β.
double select_beta(const std::vector<double>& valid_scores, const std::vector<int>& valid_labels);

// ---- evaluation ------------------------------------------------------------------

struct Segment {
    std::size_t start = 0;  // inclusive
    std::size_t end = 0;    // inclusive
    std::size_t length() const { return end - start + 1; }
};

std::vector<Segment> segments_from_labels(const std::vector<int>& labels);

/// Marks a whole truth segment positive when any of its points is predicted
/// positive. Throws InputError on overlapping or out-of-range segments.
std::vector<bool> point_adjust(const std::vector<bool>& pred, const std::vector<Segment>& truth);

struct Metrics {
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
    double precision = 0, recall = 0, f1 = 0;
    bool no_anomaly = false;  // truth has no positives: metrics undefined
};

Metrics evaluate(const std::vector<bool>& pred, const std::vector<int>& truth);

/// Fraction of events whose truth sensor set intersects the first k ranked
/// sensors.
double recall_at_k(const std::vector<std::vector<std::size_t>>& rankings,
                   const std::vector<std::vector<std::size_t>>& truth_sensors, std::size_t k);

// ---- reports -----------------------------------------------------------------------

struct SeverityKey {
    std::size_t duration = 0;
    std::size_t flagged_sensors = 0;
    auto operator<=>(const SeverityKey&) const = default;
};

struct AnomalyReport {
    std::size_t window_start = 0;
    std::vector<double> point_scores;
    std::vector<bool> point_flags;
    std::vector<double> sensor_scores;
    std::vector<bool> sensor_flags;
    std::vector<std::size_t> sensor_ranking;
    std::vector<double> temporal_row_errors;
    std::vector<bool> temporal_flags;
    std::size_t duration_estimate = 0;

    SeverityKey severity_rank_key() const;
    std::size_t flagged_sensor_count() const;
};

/// Scores, localizes and grades one window against the thresholds (flags are
/// strict: score > threshold).
AnomalyReport diagnose_window(std::size_t window_start, const nd::Matrix& x, const nd::Matrix& t,
                              const nd::Matrix& s, const model::ForwardOutput& out, const Thresholds& th);

}  // namespace madt::diagnosis
