#include "madt/diagnosis/diagnosis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "madt/errors.hpp"
#include "madt/losses/losses.hpp"

namespace madt::diagnosis {
namespace {

std::vector<double> weighted_row_sq_residual(const nd::Matrix& a, const nd::Matrix& b,
                                             const std::vector<double>& weights, const char* what) {
    if (!a.same_shape(b))
        throw DimensionError(std::string(what) + ": shape " + a.shape_str() + " vs " + b.shape_str());
    if (weights.size() != a.rows()) throw DimensionError(std::string(what) + ": weight length mismatch");
    std::vector<double> out(a.rows(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double s = 0;
        for (std::size_t j = 0; j < a.cols(); ++j) {
            const double e = a(i, j) - b(i, j);
            s += e * e;
        }
        out[i] = s * weights[i];
    }
    return out;
}

std::vector<double> uniform(std::size_t n) {
    return std::vector<double>(n, 1.0 / double(n));
}

}  // namespace

std::vector<double> softmax_neg(const std::vector<double>& v) {
    if (v.empty()) return {};
    const double mn = *std::min_element(v.begin(), v.end());
    std::vector<double> out(v.size());
    double s = 0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = std::exp(-(v[i] - mn));
        s += out[i];
    }
    for (auto& x : out) x /= s;
    return out;
}

std::vector<double> anomaly_score(const nd::Matrix& x, const model::ForwardOutput& out) {
    if (!x.same_shape(out.x_rec))
        throw DimensionError("anomaly_score: x is " + x.shape_str() + ", reconstruction is " + out.x_rec.shape_str());
    const auto weights =
        out.maps.temp.empty() ? uniform(x.rows()) : softmax_neg(losses::align_seri_temp(out.maps));
    return weighted_row_sq_residual(x, out.x_rec, weights, "anomaly_score");
}

std::vector<std::size_t> rank_descending(const std::vector<double>& scores) {
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    return idx;
}

Localization localize(const nd::Matrix& s, const nd::Matrix& s_rec, const model::AssociationMaps& maps) {
    Localization loc;
    if (s_rec.empty()) {
        loc.scores.assign(s.rows(), 0.0);
    } else {
        const auto weights = maps.space.empty() ? uniform(s.rows()) : softmax_neg(losses::align_space_seri_rowwise(maps));
        loc.scores = weighted_row_sq_residual(s, s_rec, weights, "localize");
    }
    loc.ranking = rank_descending(loc.scores);
    return loc;
}

std::vector<double> temporal_row_errors(const nd::Matrix& t, const nd::Matrix& t_rec,
                                        const model::AssociationMaps& maps) {
    if (t_rec.empty()) return std::vector<double>(t.rows(), 0.0);
    const auto weights = maps.temp.empty() ? uniform(t.rows()) : softmax_neg(losses::align_seri_temp(maps));
    return weighted_row_sq_residual(t, t_rec, weights, "severity");
}

Severity severity(const nd::Matrix& t, const nd::Matrix& t_rec, const model::AssociationMaps& maps,
                  double delta_temporal) {
    Severity sev;
    sev.row_errors = temporal_row_errors(t, t_rec, maps);
    sev.flagged.resize(sev.row_errors.size());
    for (std::size_t i = 0; i < sev.row_errors.size(); ++i) {
        sev.flagged[i] = sev.row_errors[i] > delta_temporal;
        sev.duration += sev.flagged[i] ? 1 : 0;
    }
    return sev;
}

ThresholdRule parse_rule(const std::string& s) {
    if (s == "ratio" || s == "ratio_r") return ThresholdRule::ratio;
    if (s == "betamax" || s == "beta_max") return ThresholdRule::beta_max;
    throw ConfigError("unknown threshold rule '" + s + "' (expected ratio or betamax)");
}

std::string rule_name(ThresholdRule r) {
    return r == ThresholdRule::ratio ? "ratio" : "betamax";
}

void ThresholdParams::validate() const {
    if (rule == ThresholdRule::ratio && !(r > 0 && r < 1)) throw ParameterError("threshold ratio r must lie in (0, 1)");
    if (rule == ThresholdRule::beta_max && !(beta >= 1 && beta <= 2))
        throw ParameterError("threshold beta must lie in [1, 2]");
}

double calibrate(const std::vector<double>& valid_scores, const ThresholdParams& params) {
    if (valid_scores.empty()) throw CalibrationError("calibrate: empty validation score stream");
    params.validate();
    if (params.rule == ThresholdRule::beta_max)
        return params.beta * *std::max_element(valid_scores.begin(), valid_scores.end());
    std::vector<double> sorted = valid_scores;
    std::sort(sorted.begin(), sorted.end());
    const double n = double(sorted.size());
    // Small epsilon guards against (1 - r) * n landing a hair above an integer.
    auto rank = std::size_t(std::ceil((1.0 - params.r) * n - 1e-9));
    rank = std::clamp<std::size_t>(rank, 1, sorted.size());
    return sorted[rank - 1];
}

double select_beta(const std::vector<double>& valid_scores, const std::vector<int>& valid_labels) {
    if (valid_scores.size() != valid_labels.size()) throw DimensionError("select_beta: scores/labels length mismatch");
    if (valid_scores.empty()) throw CalibrationError("select_beta: empty validation score stream");
    const double mx = *std::max_element(valid_scores.begin(), valid_scores.end());
    const auto segs = segments_from_labels(valid_labels);
    double best_beta = 1.0, best_f1 = -1.0;
    for (int step = 0; step <= 20; ++step) {
        const double beta = 1.0 + 0.05 * step;
        std::vector<bool> pred(valid_scores.size());
        for (std::size_t i = 0; i < pred.size(); ++i) pred[i] = valid_scores[i] > beta * mx;
        const auto m = evaluate(point_adjust(pred, segs), valid_labels);
        if (m.f1 > best_f1) {
            best_f1 = m.f1;
            best_beta = beta;
        }
    }
    return best_beta;
}

std::vector<Segment> segments_from_labels(const std::vector<int>& labels) {
    std::vector<Segment> out;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (!labels[i]) continue;
        if (!out.empty() && out.back().end + 1 == i)
            out.back().end = i;
        else
            out.push_back({i, i});
    }
    return out;
}

std::vector<bool> point_adjust(const std::vector<bool>& pred, const std::vector<Segment>& truth) {
    std::vector<Segment> sorted = truth;
    std::sort(sorted.begin(), sorted.end(), [](const Segment& a, const Segment& b) { return a.start < b.start; });
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        if (sorted[i].start > sorted[i].end || sorted[i].end >= pred.size())
            throw InputError("point_adjust: segment out of range");
        if (i > 0 && sorted[i].start <= sorted[i - 1].end) throw InputError("point_adjust: overlapping truth segments");
    }
    std::vector<bool> out = pred;
    for (const auto& seg : sorted) {
        bool hit = false;
        for (std::size_t t = seg.start; t <= seg.end && !hit; ++t) hit = pred[t];
        if (hit)
            for (std::size_t t = seg.start; t <= seg.end; ++t) out[t] = true;
    }
    return out;
}

Metrics evaluate(const std::vector<bool>& pred, const std::vector<int>& truth) {
    if (pred.size() != truth.size()) throw DimensionError("evaluate: prediction and truth lengths differ");
    Metrics m;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const bool t = truth[i] != 0;
        if (pred[i] && t) ++m.tp;
        else if (pred[i] && !t) ++m.fp;
        else if (!pred[i] && t) ++m.fn;
        else ++m.tn;
    }
    m.no_anomaly = (m.tp + m.fn) == 0;
    if (m.no_anomaly) return m;
    m.precision = (m.tp + m.fp) ? double(m.tp) / double(m.tp + m.fp) : 0.0;
    m.recall = double(m.tp) / double(m.tp + m.fn);
    m.f1 = (m.precision + m.recall) > 0 ? 2 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    return m;
}

double recall_at_k(const std::vector<std::vector<std::size_t>>& rankings,
                   const std::vector<std::vector<std::size_t>>& truth_sensors, std::size_t k) {
    if (rankings.size() != truth_sensors.size()) throw DimensionError("recall_at_k: ranking/truth count mismatch");
    if (rankings.empty()) return 0.0;
    std::size_t hits = 0;
    for (std::size_t e = 0; e < rankings.size(); ++e) {
        const auto& r = rankings[e];
        const std::size_t top = std::min(k, r.size());
        bool hit = false;
        for (std::size_t i = 0; i < top && !hit; ++i)
            hit = std::find(truth_sensors[e].begin(), truth_sensors[e].end(), r[i]) != truth_sensors[e].end();
        hits += hit ? 1 : 0;
    }
    return double(hits) / double(rankings.size());
}

SeverityKey AnomalyReport::severity_rank_key() const {
    return {duration_estimate, flagged_sensor_count()};
}

std::size_t AnomalyReport::flagged_sensor_count() const {
    return std::size_t(std::count(sensor_flags.begin(), sensor_flags.end(), true));
}

AnomalyReport diagnose_window(std::size_t window_start, const nd::Matrix& x, const nd::Matrix& t, const nd::Matrix& s,
                              const model::ForwardOutput& out, const Thresholds& th) {
    AnomalyReport rep;
    rep.window_start = window_start;
    rep.point_scores = anomaly_score(x, out);
    rep.point_flags.resize(rep.point_scores.size());
    for (std::size_t i = 0; i < rep.point_scores.size(); ++i) rep.point_flags[i] = rep.point_scores[i] > th.delta_point;

    auto loc = localize(s, out.s_rec, out.maps);
    rep.sensor_scores = std::move(loc.scores);
    rep.sensor_ranking = std::move(loc.ranking);
    rep.sensor_flags.resize(rep.sensor_scores.size());
    for (std::size_t i = 0; i < rep.sensor_scores.size(); ++i)
        rep.sensor_flags[i] = !out.s_rec.empty() && rep.sensor_scores[i] > th.delta_sensor;

    auto sev = severity(t, out.t_rec, out.maps, th.delta_temporal);
    if (out.t_rec.empty()) sev.flagged.assign(sev.flagged.size(), false), sev.duration = 0;
    rep.temporal_row_errors = std::move(sev.row_errors);
    rep.temporal_flags = std::move(sev.flagged);
    rep.duration_estimate = sev.duration;
    return rep;
}

}  // namespace madt::diagnosis
