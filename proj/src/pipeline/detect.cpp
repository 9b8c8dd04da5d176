#include "madt/pipeline/detect.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "madt/errors.hpp"
#include "madt/losses/losses.hpp"
#include "madt/model/checkpoint.hpp"
#include "madt/model/forward.hpp"

namespace madt::pipeline {
namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double parse_double(const std::string& s, const std::string& what) {
    try {
        return std::stod(s);
    } catch (const std::exception&) {
        throw InputError("malformed " + what + ": '" + s + "'");
    }
}

nd::Matrix row_vector(const std::vector<double>& v) {
    return nd::Matrix(1, v.size(), v);
}

std::vector<double> as_vector(const nd::Matrix& m) {
    return {m.data().begin(), m.data().end()};
}

nd::Matrix weighted_residual(const nd::Matrix& a, const nd::Matrix& b, const std::vector<double>& w) {
    if (b.empty()) return {};
    nd::Matrix r(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) {
            const double e = a(i, j) - b(i, j);
            r(i, j) = e * e * w[i];
        }
    return r;
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string tok;
    std::istringstream in(line);
    while (std::getline(in, tok, sep)) out.push_back(tok);
    return out;
}

}  // namespace

void Detector::recalibrate(const diagnosis::ThresholdParams& params) {
    params.validate();
    thresholds.params = params;
    thresholds.delta_point = diagnosis::calibrate(valid_scores.point, params);
    thresholds.delta_sensor = diagnosis::calibrate(valid_scores.sensor, params);
    thresholds.delta_temporal =
        valid_scores.temporal.empty() ? 0.0 : diagnosis::calibrate(valid_scores.temporal, params);
}

void save_detector(const std::filesystem::path& path, const Detector& d) {
    model::Container c;
    model::store_state(c, d.model);
    for (const auto& [k, v] : d.config.to_map()) c.meta["train." + k] = v;
    c.meta["sensors.count"] = std::to_string(d.sensor_names.size());
    for (std::size_t j = 0; j < d.sensor_names.size(); ++j) c.meta["sensors." + std::to_string(j)] = d.sensor_names[j];
    c.meta["threshold.rule"] = diagnosis::rule_name(d.thresholds.params.rule);
    c.meta["threshold.r"] = fmt(d.thresholds.params.r);
    c.meta["threshold.beta"] = fmt(d.thresholds.params.beta);
    c.meta["threshold.point"] = fmt(d.thresholds.delta_point);
    c.meta["threshold.sensor"] = fmt(d.thresholds.delta_sensor);
    c.meta["threshold.temporal"] = fmt(d.thresholds.delta_temporal);
    c.meta["log.initial_train"] = fmt(d.log.initial_train_loss);
    c.meta["log.initial_valid"] = fmt(d.log.initial_valid_loss);
    c.meta["log.best_epoch"] = std::to_string(d.log.best_epoch);
    c.meta["log.early_stopped"] = d.log.early_stopped ? "1" : "0";
    nd::Matrix epochs(d.log.epochs.size(), 4);
    for (std::size_t e = 0; e < d.log.epochs.size(); ++e) {
        epochs(e, 0) = double(d.log.epochs[e].epoch);
        epochs(e, 1) = d.log.epochs[e].train_loss;
        epochs(e, 2) = d.log.epochs[e].valid_loss;
        epochs(e, 3) = double(d.log.epochs[e].adam_step);
    }
    c.put("log.epochs", epochs);
    c.put("norm.mean", row_vector(d.norm.mean));
    c.put("norm.std", row_vector(d.norm.std));
    c.put("valid.point", row_vector(d.valid_scores.point));
    c.put("valid.sensor", row_vector(d.valid_scores.sensor));
    c.put("valid.temporal", row_vector(d.valid_scores.temporal));
    c.meta["adam.step"] = std::to_string(d.adam.step);
    c.meta["adam.count"] = std::to_string(d.adam.m.size());
    for (std::size_t k = 0; k < d.adam.m.size(); ++k) {
        c.put("adam.m." + std::to_string(k), d.adam.m[k]);
        c.put("adam.v." + std::to_string(k), d.adam.v[k]);
    }
    write_container(path, c);
}

Detector load_detector(const std::filesystem::path& path) {
    const auto c = model::read_container(path);
    Detector d;
    d.model = model::load_state<TrainReal>(c);
    KeyValues kv;
    for (const auto& [k, v] : c.meta)
        if (k.rfind("train.", 0) == 0) kv[k.substr(6)] = v;
    d.config = TrainConfig::from_map(kv, d.model.config.sensors);
    const std::size_t n = std::stoul(c.meta_at("sensors.count"));
    for (std::size_t j = 0; j < n; ++j) d.sensor_names.push_back(c.meta_at("sensors." + std::to_string(j)));
    d.thresholds.params.rule = diagnosis::parse_rule(c.meta_at("threshold.rule"));
    d.thresholds.params.r = parse_double(c.meta_at("threshold.r"), "threshold");
    d.thresholds.params.beta = parse_double(c.meta_at("threshold.beta"), "threshold");
    d.thresholds.delta_point = parse_double(c.meta_at("threshold.point"), "threshold");
    d.thresholds.delta_sensor = parse_double(c.meta_at("threshold.sensor"), "threshold");
    d.thresholds.delta_temporal = parse_double(c.meta_at("threshold.temporal"), "threshold");
    d.log.initial_train_loss = parse_double(c.meta_at("log.initial_train"), "log");
    d.log.initial_valid_loss = parse_double(c.meta_at("log.initial_valid"), "log");
    d.log.best_epoch = std::stoul(c.meta_at("log.best_epoch"));
    d.log.early_stopped = c.meta_at("log.early_stopped") == "1";
    const auto epochs = c.get<double>("log.epochs");
    for (std::size_t e = 0; e < epochs.rows(); ++e)
        d.log.epochs.push_back({std::size_t(epochs(e, 0)), epochs(e, 1), epochs(e, 2), std::uint64_t(epochs(e, 3))});
    d.norm.mean = as_vector(c.get<double>("norm.mean"));
    d.norm.std = as_vector(c.get<double>("norm.std"));
    d.valid_scores.point = as_vector(c.get<double>("valid.point"));
    d.valid_scores.sensor = as_vector(c.get<double>("valid.sensor"));
    d.valid_scores.temporal = as_vector(c.get<double>("valid.temporal"));
    d.adam.step = std::stoull(c.meta_at("adam.step"));
    const std::size_t count = std::stoul(c.meta_at("adam.count"));
    for (std::size_t k = 0; k < count; ++k) {
        d.adam.m.push_back(c.get<TrainReal>("adam.m." + std::to_string(k)));
        d.adam.v.push_back(c.get<TrainReal>("adam.v." + std::to_string(k)));
    }
    if (d.sensor_names.size() != d.model.config.sensors || d.norm.mean.size() != d.model.config.sensors)
        throw InputError("checkpoint sensor metadata disagrees with the model configuration");
    return d;
}

WindowOutput diagnose(const TrainState& model, const PreparedWindow& w, const diagnosis::Thresholds& th) {
    const auto out = model::forward_values(model, w.window, w.pair);
    WindowOutput r;
    r.report = diagnosis::diagnose_window(w.window.start_index, w.window.values, w.pair.temporal, w.pair.spatial, out,
                                          th);
    if (!out.t_rec.empty()) {
        const auto wt = out.maps.temp.empty() ? std::vector<double>(w.pair.temporal.rows(), 1.0 / double(w.pair.temporal.rows()))
                                              : diagnosis::softmax_neg(losses::align_seri_temp(out.maps));
        r.temporal_residual = weighted_residual(w.pair.temporal, out.t_rec, wt);
    }
    if (!out.s_rec.empty()) {
        const auto ws = out.maps.space.empty() ? std::vector<double>(w.pair.spatial.rows(), 1.0 / double(w.pair.spatial.rows()))
                                               : diagnosis::softmax_neg(losses::align_space_seri_rowwise(out.maps));
        r.spatial_residual = weighted_residual(w.pair.spatial, out.s_rec, ws);
    }
    return r;
}

ScoreStreams score_streams(const TrainState& model, const std::vector<PreparedWindow>& windows) {
    ScoreStreams s;
    const diagnosis::Thresholds none;
    for (const auto& w : windows) {
        const auto r = diagnose(model, w, none).report;
        s.point.insert(s.point.end(), r.point_scores.begin(), r.point_scores.end());
        s.sensor.insert(s.sensor.end(), r.sensor_scores.begin(), r.sensor_scores.end());
        if (model.config.temporal_branch)
            s.temporal.insert(s.temporal.end(), r.temporal_row_errors.begin(), r.temporal_row_errors.end());
    }
    return s;
}

Detector fit_detector(const Series& train_series, const TrainConfig& cfg,
                      const std::function<void(const EpochRecord&)>& on_epoch,
                      const std::function<void(const std::string&)>& warn, const Detector* resume) {
    cfg.validate();
    if (train_series.sensors() != cfg.model.sensors)
        throw ConfigError("series has " + std::to_string(train_series.sensors()) + " sensors, config expects " +
                          std::to_string(cfg.model.sensors));
    const std::size_t w = cfg.model.window;
    const std::size_t total = train_series.length();
    const std::size_t valid_len = std::size_t(std::floor(double(total) * cfg.valid_fraction));
    const std::size_t train_len = total - valid_len;
    if (train_len < w || valid_len < w)
        throw InputError("training series of length " + std::to_string(total) +
                         " is too short for a window of " + std::to_string(w) + " in both splits");

    Detector d;
    d.config = cfg;
    d.sensor_names = train_series.sensor_names;
    const Series fit_part = slice(train_series, 0, train_len);
    const Series valid_part = slice(train_series, train_len, total);
    d.norm = resume ? resume->norm : fit_normalization(fit_part.values);

    auto windows_of = [&](const Series& s, const char* name) {
        auto all = make_windows(apply_normalization(s.values, d.norm), w);
        std::vector<statemat::TimeWindow> kept;
        std::size_t dropped = 0;
        for (auto& win : all) {
            bool anomalous = false;
            if (s.labels)
                for (std::size_t i = 0; i < w && !anomalous; ++i) anomalous = (*s.labels)[win.start_index + i] != 0;
            if (anomalous)
                ++dropped;
            else
                kept.push_back(std::move(win));
        }
        if (dropped && warn)
            warn("dropped " + std::to_string(dropped) + " " + name + " window(s) containing labelled anomalies");
        return prepare_windows(kept, cfg.tau_t, cfg.tau_s);
    };
    const auto train_w = windows_of(fit_part, "training");
    const auto valid_w = windows_of(valid_part, "validation");

    TrainResult prior;
    if (resume) {
        prior.model = resume->model;
        prior.adam = resume->adam;
        prior.log = resume->log;
    }
    auto res = train(train_w, valid_w, cfg, resume ? &prior : nullptr, on_epoch);
    d.model = std::move(res.model);
    d.adam = std::move(res.adam);
    d.log = std::move(res.log);
    d.valid_scores = score_streams(d.model, valid_w);
    d.recalibrate(cfg.threshold);
    return d;
}

std::vector<DetectedEvent> extract_events(const std::vector<bool>& point_flags,
                                          const std::vector<bool>& temporal_flags,
                                          const std::vector<WindowOutput>& windows, std::size_t window,
                                          std::size_t gap) {
    const std::size_t len = point_flags.size();
    std::vector<std::pair<std::size_t, std::size_t>> runs;
    for (std::size_t i = 0; i < len; ++i) {
        if (!point_flags[i] && !(i < temporal_flags.size() && temporal_flags[i])) continue;
        if (!runs.empty() && i <= runs.back().second + gap + 1)
            runs.back().second = i;
        else
            runs.emplace_back(i, i);
    }

    std::vector<DetectedEvent> events;
    for (const auto& [a, b] : runs) {
        DetectedEvent ev;
        ev.id = events.size();
        ev.start = a;
        ev.end = b;
        for (std::size_t i = a; i <= b; ++i) ev.duration_estimate += (i < temporal_flags.size() && temporal_flags[i]);
        std::set<std::size_t> flagged;
        for (std::size_t k = a / window; k <= b / window && k < windows.size(); ++k) {
            const auto& rep = windows[k].report;
            if (ev.sensor_scores.empty()) ev.sensor_scores.assign(rep.sensor_scores.size(), 0.0);
            for (std::size_t j = 0; j < rep.sensor_scores.size(); ++j) {
                ev.sensor_scores[j] += rep.sensor_scores[j];
                if (rep.sensor_flags[j]) flagged.insert(j);
            }
        }
        ev.flagged_sensor_count = flagged.size();
        ev.sensor_ranking = diagnosis::rank_descending(ev.sensor_scores);
        events.push_back(std::move(ev));
    }

    std::vector<std::size_t> order(events.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
        const diagnosis::SeverityKey kx{events[x].duration_estimate, events[x].flagged_sensor_count};
        const diagnosis::SeverityKey ky{events[y].duration_estimate, events[y].flagged_sensor_count};
        return kx > ky;
    });
    for (std::size_t r = 0; r < order.size(); ++r) events[order[r]].severity_rank = r + 1;
    return events;
}

Detection run_detect(const Detector& d, const Series& raw, const diagnosis::Thresholds& th) {
    if (raw.sensors() != d.model.config.sensors)
        throw ConfigError("series has " + std::to_string(raw.sensors()) + " sensors, checkpoint expects " +
                          std::to_string(d.model.config.sensors));
    const std::size_t w = d.model.config.window;
    const auto windows =
        prepare_windows(make_windows(apply_normalization(raw.values, d.norm), w), d.config.tau_t, d.config.tau_s);

    Detection det;
    det.covered = windows.size() * w;
    for (const auto& win : windows) {
        auto out = diagnose(d.model, win, th);
        const auto& r = out.report;
        det.point_scores.insert(det.point_scores.end(), r.point_scores.begin(), r.point_scores.end());
        det.point_flags.insert(det.point_flags.end(), r.point_flags.begin(), r.point_flags.end());
        det.temporal_scores.insert(det.temporal_scores.end(), r.temporal_row_errors.begin(), r.temporal_row_errors.end());
        det.temporal_flags.insert(det.temporal_flags.end(), r.temporal_flags.begin(), r.temporal_flags.end());
        det.windows.push_back(std::move(out));
    }
    det.events = extract_events(det.point_flags, det.temporal_flags, det.windows, w, d.config.event_gap);
    return det;
}

EvalResult evaluate_detection(const std::vector<bool>& point_flags, const std::vector<DetectedEvent>& events,
                              const std::vector<int>& labels, const std::vector<TruthEvent>* truth) {
    if (labels.size() < point_flags.size()) throw InputError("labels are shorter than the scored timeline");
    const std::vector<int> scored(labels.begin(), labels.begin() + long(point_flags.size()));

    std::vector<TruthEvent> segs;
    if (truth) {
        for (const auto& t : *truth)
            if (t.start + t.duration <= point_flags.size()) segs.push_back(t);
    } else {
        for (const auto& s : diagnosis::segments_from_labels(scored)) segs.push_back({s.start, s.length(), {}});
    }
    std::vector<diagnosis::Segment> truth_segments;
    for (const auto& s : diagnosis::segments_from_labels(scored)) truth_segments.push_back(s);

    EvalResult r;
    r.point = diagnosis::evaluate(diagnosis::point_adjust(point_flags, truth_segments), scored);
    r.events_total = segs.size();
    r.matched.assign(segs.size(), std::nullopt);

    std::vector<std::vector<std::size_t>> rankings, truth_sensors;
    double dur_err = 0;
    for (std::size_t e = 0; e < segs.size(); ++e) {
        const std::size_t a = segs[e].start, b = segs[e].start + segs[e].duration - 1;
        bool hit = false;
        for (std::size_t i = a; i <= b && !hit; ++i) hit = point_flags[i];
        r.events_detected += hit;

        std::size_t best_overlap = 0;
        for (std::size_t k = 0; k < events.size(); ++k) {
            const std::size_t lo = std::max(a, events[k].start), hi = std::min(b, events[k].end);
            if (lo <= hi && hi - lo + 1 > best_overlap) {
                best_overlap = hi - lo + 1;
                r.matched[e] = k;
            }
        }
        if (r.matched[e]) {
            const auto& ev = events[*r.matched[e]];
            dur_err += std::abs(double(ev.duration_estimate) - double(segs[e].duration));
            rankings.push_back(ev.sensor_ranking);
        } else {
            dur_err += double(segs[e].duration);
            rankings.emplace_back();
        }
        truth_sensors.push_back(segs[e].sensors);
    }
    r.mean_duration_abs_err = segs.empty() ? 0.0 : dur_err / double(segs.size());
    if (truth && !segs.empty()) r.recall_at_3 = diagnosis::recall_at_k(rankings, truth_sensors, 3);
    return r;
}

std::string format_metrics(const EvalResult& r) {
    std::ostringstream o;
    if (r.point.no_anomaly) {
        o << "status:no_anomaly\n";
        o << "false_positives:" << r.point.fp << '\n';
        return o.str();
    }
    o << "precision:" << fmt(r.point.precision) << '\n';
    o << "recall:" << fmt(r.point.recall) << '\n';
    o << "f1:" << fmt(r.point.f1) << '\n';
    o << "recall_at_3:" << (r.recall_at_3 ? fmt(*r.recall_at_3) : std::string("na")) << '\n';
    o << "events_detected:" << r.events_detected << '/' << r.events_total << '\n';
    o << "mean_duration_abs_err:" << fmt(r.mean_duration_abs_err) << '\n';
    return o.str();
}

void write_reports(const std::filesystem::path& dir, const Detection& det, const std::vector<std::string>& names) {
    std::filesystem::create_directories(dir);
    auto open = [&](const char* file) {
        std::ofstream f(dir / file, std::ios::binary);
        if (!f) throw InputError("cannot write " + (dir / file).string());
        return f;
    };
    {
        auto f = open("points.csv");
        f << "timestep,score,flag,temporal_score,temporal_flag\n";
        for (std::size_t i = 0; i < det.point_scores.size(); ++i)
            f << i << ',' << fmt(det.point_scores[i]) << ',' << int(det.point_flags[i]) << ','
              << fmt(det.temporal_scores[i]) << ',' << int(det.temporal_flags[i]) << '\n';
    }
    {
        auto f = open("sensors.csv");
        f << "window_start,sensor,score,flag,rank\n";
        for (const auto& w : det.windows) {
            const auto& r = w.report;
            std::vector<std::size_t> rank(r.sensor_ranking.size());
            for (std::size_t k = 0; k < rank.size(); ++k) rank[r.sensor_ranking[k]] = k + 1;
            for (std::size_t j = 0; j < r.sensor_scores.size(); ++j)
                f << r.window_start << ',' << names[j] << ',' << fmt(r.sensor_scores[j]) << ','
                  << int(r.sensor_flags[j]) << ',' << rank[j] << '\n';
        }
    }
    {
        auto f = open("events.csv");
        f << "event_id,start,end,duration_estimate,flagged_sensor_count,severity_rank\n";
        for (const auto& e : det.events)
            f << e.id << ',' << e.start << ',' << e.end << ',' << e.duration_estimate << ',' << e.flagged_sensor_count
              << ',' << e.severity_rank << '\n';
    }
    {
        auto f = open("event_rankings.csv");
        f << "event_id,rank,sensor_index,sensor,score\n";
        for (const auto& e : det.events)
            for (std::size_t k = 0; k < e.sensor_ranking.size(); ++k) {
                const std::size_t j = e.sensor_ranking[k];
                f << e.id << ',' << k + 1 << ',' << j << ',' << names[j] << ',' << fmt(e.sensor_scores[j]) << '\n';
            }
    }
    model::Container c;
    c.meta["window_count"] = std::to_string(det.windows.size());
    for (const auto& w : det.windows) {
        const std::string k = std::to_string(w.report.window_start);
        if (!w.temporal_residual.empty()) c.put("temporal_residual." + k, w.temporal_residual);
        if (!w.spatial_residual.empty()) c.put("spatial_residual." + k, w.spatial_residual);
    }
    model::write_container(dir / "residuals.madt", c);
}

ReportFiles read_reports(const std::filesystem::path& dir) {
    auto lines_of = [&](const char* file) {
        std::ifstream f(dir / file);
        if (!f) throw InputError("cannot open " + (dir / file).string());
        std::vector<std::string> out;
        std::string line;
        std::getline(f, line);
        while (std::getline(f, line))
            if (!line.empty()) out.push_back(line);
        return out;
    };
    ReportFiles r;
    std::size_t lineno = 1;
    for (const auto& line : lines_of("points.csv")) {
        ++lineno;
        const auto c = split(line, ',');
        if (c.size() < 3) throw ParseError("points.csv: expected at least 3 cells", lineno);
        r.point_scores.push_back(parse_double(c[1], "score"));
        r.point_flags.push_back(c[2] == "1");
    }
    std::map<std::size_t, std::size_t> index_of;
    lineno = 1;
    for (const auto& line : lines_of("events.csv")) {
        ++lineno;
        const auto c = split(line, ',');
        if (c.size() != 6) throw ParseError("events.csv: expected 6 cells", lineno);
        DetectedEvent e;
        try {
            e.id = std::stoul(c[0]);
            e.start = std::stoul(c[1]);
            e.end = std::stoul(c[2]);
            e.duration_estimate = std::stoul(c[3]);
            e.flagged_sensor_count = std::stoul(c[4]);
            e.severity_rank = std::stoul(c[5]);
        } catch (const std::exception&) {
            throw ParseError("events.csv: malformed row", lineno);
        }
        index_of[e.id] = r.events.size();
        r.events.push_back(e);
    }
    lineno = 1;
    for (const auto& line : lines_of("event_rankings.csv")) {
        ++lineno;
        const auto c = split(line, ',');
        if (c.size() != 5) throw ParseError("event_rankings.csv: expected 5 cells", lineno);
        const auto it = index_of.find(std::stoul(c[0]));
        if (it == index_of.end()) throw ParseError("event_rankings.csv: unknown event id", lineno);
        auto& e = r.events[it->second];
        const std::size_t j = std::stoul(c[2]);
        e.sensor_ranking.push_back(j);
        if (e.sensor_scores.size() <= j) e.sensor_scores.resize(j + 1, 0.0);
        e.sensor_scores[j] = parse_double(c[4], "score");
    }
    return r;
}

}  // namespace madt::pipeline
