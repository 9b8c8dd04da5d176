// Acceptance suite: one PASS/FAIL line per criterion. Exit status is non-zero
// when any gating criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "convert.hpp"
#include "madt/diagnosis/diagnosis.hpp"
#include "madt/losses/losses.hpp"
#include "madt/model/checkpoint.hpp"
#include "madt/model/forward.hpp"
#include "madt/pipeline/detect.hpp"
#include "madt/pipeline/selfcheck.hpp"
#include "madt/pipeline/synth.hpp"
#include "madt/statemat/state_matrix.hpp"

using namespace madt;
using namespace madt::pipeline;
namespace fs = std::filesystem;

namespace tol {
constexpr double kGradRelErr = 1e-3;
constexpr std::size_t kGradProbes = 200;
constexpr double kGradSeconds = 120;
constexpr double kOracle = 1e-8;
constexpr std::size_t kOracleInstances = 50;
constexpr double kAttention = 1e-10;
constexpr double kRowSum = 1e-5;
constexpr double kKlFloor = -1e-9;
constexpr std::size_t kAdjustCases = 1000;
constexpr double kCaseF1 = 0.90;
constexpr std::size_t kCaseEvents = 6;
constexpr double kCaseRecall3 = 0.90;
constexpr double kDurationRel = 0.20;
constexpr std::size_t kDurationsWithin = 5;
constexpr double kCaseSeconds = 15 * 60;
constexpr double kLossDrop = 0.50;
constexpr std::size_t kLossDropEpochs = 5;
constexpr double kAblationMargin = 0.01;
constexpr std::uint64_t kSeeds[3] = {0, 1, 2};
// Regression fixture for the seeded loss curve (seed 0, case-study data).
constexpr double kFixtureInitialLoss = 14126.3;
constexpr double kFixtureInitialRel = 0.01;
constexpr double kFixtureEpoch5Loss = 79.5045;
constexpr double kFixtureEpoch5Rel = 0.25;
constexpr double kSmdF1 = 92.00;
constexpr double kPsmF1 = 98.18;
}  // namespace tol

namespace {

int failures = 0;

void report(const std::string& id, bool pass, const std::string& detail, bool gating = true) {
    std::printf("%s [%s] %s\n", pass ? "PASS" : (gating ? "FAIL" : "INFO"), id.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!pass && gating) ++failures;
}

[[gnu::format(printf, 1, 2)]] std::string fmt(const char* f, ...) {
    char buf[1024];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double max_diff(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) return INFINITY;
    double d = 0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

std::vector<oracle::Mat> as_mats(const std::vector<nd::Matrix>& v) {
    std::vector<oracle::Mat> out;
    for (const auto& m : v) out.push_back(testutil::to_mat(m));
    return out;
}

std::string read_bytes(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

// ---- 1 ----------------------------------------------------------------------

void gradient_correctness() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto r = run_model_gradcheck(1, tol::kGradProbes);
    const double secs = seconds_since(t0);
    std::set<std::string> probed;
    for (const auto& p : r.probes) probed.insert(p.param);
    const auto state = model::ModelState<double>::initialize(gradcheck_config(), 0);
    const std::size_t tensors = state.parameters().size();
    const bool pass = r.probes.size() >= tol::kGradProbes && r.max_rel_err <= tol::kGradRelErr &&
                      probed.size() == tensors && secs < tol::kGradSeconds;
    report("1", pass,
           fmt("gradient correctness: %zu probes over %zu/%zu parameter tensors, max_rel_err=%.3g (tol %.0e), %.2fs "
               "(limit %.0fs)",
               r.probes.size(), probed.size(), tensors, r.max_rel_err, tol::kGradRelErr, secs, tol::kGradSeconds));
}

// ---- 2 ----------------------------------------------------------------------

void oracle_equivalence() {
    std::mt19937_64 rng(2024);
    std::map<std::string, double> worst = {{"temporal_state_matrix", 0}, {"spatial_state_matrix", 0},
                                           {"sym_kl_rows", 0},           {"anomaly_score", 0},
                                           {"localize", 0},              {"severity", 0}};
    for (std::size_t inst = 0; inst < tol::kOracleInstances; ++inst) {
        const std::size_t w = 4 + rng() % 12, n = 2 + rng() % 6, k = 1 + rng() % 3;
        const auto x = oracle::random_matrix(w, n, rng);
        const double tau_t = 0.5 + double(rng() % 100) / 10.0, tau_s = 0.5 + double(rng() % 100) / 10.0;
        statemat::TimeWindow win;
        win.values = testutil::to_matrix(x);
        worst["temporal_state_matrix"] =
            std::max(worst["temporal_state_matrix"],
                     testutil::max_abs_diff_mat(testutil::to_mat(statemat::temporal_state_matrix(win, tau_t)),
                                                oracle::temporal_state(x, tau_t)));
        worst["spatial_state_matrix"] =
            std::max(worst["spatial_state_matrix"],
                     testutil::max_abs_diff_mat(testutil::to_mat(statemat::spatial_state_matrix(win, tau_s)),
                                                oracle::spatial_state(x, tau_s)));

        const auto p = oracle::random_stochastic(w, w, rng), q = oracle::random_stochastic(w, w, rng);
        worst["sym_kl_rows"] =
            std::max(worst["sym_kl_rows"], max_diff(losses::sym_kl_rows(testutil::to_matrix(p), testutil::to_matrix(q)),
                                                    oracle::sym_kl_rows(p, q)));

        model::ForwardOutput out;
        for (std::size_t l = 0; l < k; ++l) {
            out.maps.seri.push_back(testutil::to_matrix(oracle::random_stochastic(w, w, rng)));
            out.maps.temp.push_back(testutil::to_matrix(oracle::random_stochastic(w, w, rng)));
            out.maps.space.push_back(testutil::to_matrix(oracle::random_stochastic(n, n, rng)));
        }
        const auto t = oracle::random_matrix(w, w, rng), s = oracle::random_matrix(n, n, rng);
        const auto xr = oracle::random_matrix(w, n, rng), tr = oracle::random_matrix(w, w, rng),
                   sr = oracle::random_matrix(n, n, rng);
        out.x_rec = testutil::to_matrix(xr);
        out.t_rec = testutil::to_matrix(tr);
        out.s_rec = testutil::to_matrix(sr);
        const auto seri = as_mats(out.maps.seri), temp = as_mats(out.maps.temp), space = as_mats(out.maps.space);
        worst["anomaly_score"] = std::max(worst["anomaly_score"],
                                          max_diff(diagnosis::anomaly_score(testutil::to_matrix(x), out),
                                                   oracle::anomaly_score(x, xr, seri, temp)));
        worst["localize"] = std::max(
            worst["localize"], max_diff(diagnosis::localize(testutil::to_matrix(s), out.s_rec, out.maps).scores,
                                        oracle::localize(s, sr, space, seri)));
        worst["severity"] = std::max(
            worst["severity"], max_diff(diagnosis::temporal_row_errors(testutil::to_matrix(t), out.t_rec, out.maps),
                                        oracle::severity_rows(t, tr, seri, temp)));
    }
    bool pass = true;
    std::string detail;
    for (const auto& [name, err] : worst) {
        pass = pass && err <= tol::kOracle;
        detail += fmt(" %s=%.2g", name.c_str(), err);
    }
    report("2", pass, fmt("oracle equivalence on %zu instances (tol %.0e):", tol::kOracleInstances, tol::kOracle) + detail);
}

// ---- 3 ----------------------------------------------------------------------

void algorithm_fidelity() {
    model::ModelConfig cfg;
    cfg.window = 4;
    cfg.sensors = 3;
    cfg.d_model = 4;
    cfg.heads = 2;
    cfg.layers = 1;
    double worst = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto st = model::ModelState<double>::initialize(cfg, seed);
        std::mt19937_64 rng(seed + 100);
        const auto hx = oracle::random_matrix(4, 4, rng), ht = oracle::random_matrix(4, 4, rng),
                   hs = oracle::random_matrix(3, 4, rng);
        const auto mx = testutil::to_matrix(hx), mt = testutil::to_matrix(ht), ms = testutil::to_matrix(hs);
        nd::Tape<double> tape;
        model::Streams<double> in;
        in.series = tape.watch(mx);
        in.temporal = tape.watch(mt);
        in.spatial = tape.watch(ms);
        const auto r = model::mad_attention(tape, st.layers[0], in, cfg);
        const oracle::Mat* inputs[3] = {&hx, &ht, &hs};
        const nd::Var<double> outs[3] = {r.streams.series, r.streams.temporal, r.streams.spatial};
        const nd::Var<double> maps[3] = {r.maps.seri, r.maps.temp, r.maps.space};
        for (int b = 0; b < 3; ++b) {
            const auto& p = st.layers[0].branch[b].attn;
            const auto ref = oracle::attention(*inputs[b], testutil::to_mat(p.wq), testutil::to_mat(p.wk),
                                               testutil::to_mat(p.wv), testutil::to_mat(p.out.weight),
                                               testutil::to_mat(p.out.bias)[0], cfg.heads);
            worst = std::max(worst, testutil::max_abs_diff_mat(testutil::to_mat(outs[b].value()), ref.out));
            worst = std::max(worst, testutil::max_abs_diff_mat(testutil::to_mat(maps[b].value()), ref.map));
        }
    }
    report("3", worst <= tol::kAttention,
           fmt("attention fidelity (w=4, n=3, d=4, h=2; 10 seeds x 3 branches): max_abs_err=%.2g (tol %.0e)", worst,
               tol::kAttention));
}

// ---- 4 ----------------------------------------------------------------------

void distribution_invariants() {
    std::mt19937_64 rng(4);
    double worst_row = 0, min_kl = INFINITY;
    const auto check_kl = [&](const std::vector<double>& v) {
        for (double x : v) min_kl = std::min(min_kl, x);
    };
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto cfg = model::ModelConfig::desk(2 + seed % 6, 10 + seed);
        cfg.d_model = 16;
        const auto st = model::ModelState<float>::initialize(cfg, seed);
        statemat::TimeWindow win;
        win.values = testutil::to_matrix(oracle::random_matrix(cfg.window, cfg.sensors, rng, 3.0));
        const auto out = model::forward_values(st, win, statemat::build_state_matrices(win));
        for (const auto* group : {&out.maps.seri, &out.maps.temp, &out.maps.space})
            for (const auto& m : *group)
                for (std::size_t i = 0; i < m.rows(); ++i) {
                    double s = 0;
                    for (std::size_t j = 0; j < m.cols(); ++j) s += m(i, j);
                    worst_row = std::max(worst_row, std::abs(s - 1.0));
                }
        const auto lb = losses::evaluate_losses(out, win.values, statemat::temporal_state_matrix(win, cfg.sensors),
                                                statemat::spatial_state_matrix(win, cfg.window), 19.0);
        check_kl(lb.align_seri_temp_pointwise);
        check_kl(lb.align_seri_space_rowwise);
        check_kl({lb.align_st, lb.align_ssp, lb.align_tsp});
        for (std::size_t l = 0; l < out.maps.layers(); ++l) {
            check_kl(losses::sym_kl_rows(out.maps.seri[l], out.maps.temp[l]));
            check_kl({losses::cross_dim_kl(out.maps.temp[l], out.maps.space[l])});
        }
        // Near-identical and sharply peaked distributions stress the floor.
        const auto p = testutil::to_matrix(oracle::random_stochastic(6, 6, rng));
        auto q = p;
        q(0, 0) += 1e-15;
        check_kl(losses::sym_kl_rows(p, q));
        nd::Matrix onehot(6, 6);
        for (std::size_t i = 0; i < 6; ++i) onehot(i, i) = 1.0;
        check_kl(losses::sym_kl_rows(onehot, p));
        check_kl(losses::cross_dim_kl_rowwise(onehot, testutil::to_matrix(oracle::random_stochastic(4, 4, rng))));
    }

    bool idempotent = true, monotone = true, literal = true;
    for (std::size_t c = 0; c < tol::kAdjustCases; ++c) {
        const std::size_t len = 5 + rng() % 60;
        std::vector<diagnosis::Segment> segs;
        std::vector<std::pair<std::size_t, std::size_t>> raw;
        std::size_t pos = rng() % 4;
        while (pos < len) {
            const std::size_t end = std::min(len - 1, pos + rng() % 8);
            if (rng() % 2) {
                segs.push_back({pos, end});
                raw.push_back({pos, end});
            }
            pos = end + 1 + rng() % 6;
        }
        std::vector<bool> pred(len), wider(len);
        for (std::size_t i = 0; i < len; ++i) {
            pred[i] = rng() % 7 == 0;
            wider[i] = pred[i] || rng() % 5 == 0;
        }
        const auto a = diagnosis::point_adjust(pred, segs);
        idempotent = idempotent && diagnosis::point_adjust(a, segs) == a;
        const auto b = diagnosis::point_adjust(wider, segs);
        for (std::size_t i = 0; i < len; ++i) monotone = monotone && (!a[i] || b[i]) && (!pred[i] || a[i]);
        literal = literal && oracle::point_adjust_ok(pred, raw, a);
    }
    const bool pass = worst_row <= tol::kRowSum && min_kl >= tol::kKlFloor && idempotent && monotone && literal;
    report("4", pass,
           fmt("distribution invariants: max |row sum - 1|=%.2g (tol %.0e), min KL quantity=%.3g (floor %.0e); "
               "point_adjust over %zu cases idempotent=%s monotone=%s matches-oracle=%s",
               worst_row, tol::kRowSum, min_kl, tol::kKlFloor, tol::kAdjustCases, idempotent ? "yes" : "no",
               monotone ? "yes" : "no", literal ? "yes" : "no"));
}

// ---- 5..8 -------------------------------------------------------------------

struct RunOutcome {
    Detector detector;
    Detection detection;
    EvalResult eval;
    double seconds = 0;
};

TrainConfig case_config(std::uint64_t seed, const std::string& variant) {
    auto cfg = TrainConfig::desk(7);
    cfg.seed = seed;
    if (variant == "no_temporal") cfg.model.temporal_branch = false;
    if (variant == "no_spatial") cfg.model.spatial_branch = false;
    if (variant == "no_align") cfg.lambda = 0;
    return cfg;
}

RunOutcome run_case(const SplitDataset& ds, const TrainConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    RunOutcome r;
    r.detector = fit_detector(ds.train, cfg);
    r.detection = run_detect(r.detector, ds.test, r.detector.thresholds);
    r.eval = evaluate_detection(r.detection.point_flags, r.detection.events, *ds.test.labels, &ds.test_events);
    r.seconds = seconds_since(t0);
    return r;
}

void case_study(const SplitDataset& ds, const RunOutcome& run) {
    const auto& ev = run.eval;
    std::size_t within = 0;
    std::string durations;
    std::vector<std::pair<std::size_t, std::size_t>> rank_and_truth;  // matched severity rank, truth duration
    for (std::size_t e = 0; e < ds.test_events.size(); ++e) {
        const auto& truth = ds.test_events[e];
        if (!ev.matched[e]) {
            durations += fmt(" %zu->miss", truth.duration);
            continue;
        }
        const auto& det = run.detection.events[*ev.matched[e]];
        const double err = std::abs(double(det.duration_estimate) - double(truth.duration));
        within += err <= tol::kDurationRel * double(truth.duration) ? 1 : 0;
        durations += fmt(" %zu->%zu", truth.duration, det.duration_estimate);
        rank_and_truth.push_back({det.severity_rank, truth.duration});
    }
    std::sort(rank_and_truth.begin(), rank_and_truth.end());
    bool order = rank_and_truth.size() == ds.test_events.size();
    for (std::size_t i = 1; i < rank_and_truth.size(); ++i)
        order = order && rank_and_truth[i - 1].second > rank_and_truth[i].second;

    const double r3 = ev.recall_at_3.value_or(0.0);
    const bool pass = ev.point.f1 >= tol::kCaseF1 && ev.events_detected == tol::kCaseEvents &&
                      r3 >= tol::kCaseRecall3 && within >= tol::kDurationsWithin && order &&
                      run.seconds < tol::kCaseSeconds;
    report("5", pass,
           fmt("case study: F1=%.4f (>= %.2f), events %zu/%zu, recall@3=%.3f (>= %.2f), durations within %.0f%%: "
               "%zu/6 (>= %zu) [",
               ev.point.f1, tol::kCaseF1, ev.events_detected, ev.events_total, r3, tol::kCaseRecall3,
               tol::kDurationRel * 100, within, tol::kDurationsWithin) +
               durations +
               fmt(" ], severity order %s, detected events %zu, %.1fs (limit %.0fs)", order ? "exact" : "WRONG",
                   run.detection.events.size(), run.seconds, tol::kCaseSeconds));
}

void clean_series(const RunOutcome& run) {
    auto spec = CaseStudy{}.spec();
    spec.injections.clear();
    const auto clean = generate_split(spec);
    const auto det = run_detect(run.detector, clean.test, run.detector.thresholds);
    const auto flagged = std::count(det.point_flags.begin(), det.point_flags.end(), true);
    report("5-clean", det.events.empty(),
           fmt("clean synthetic test series with calibrated thresholds: %zu event(s), %zu flagged point(s)",
               det.events.size(), std::size_t(flagged)),
           true);
}

void training_sanity(const RunOutcome& run) {
    const auto& log = run.detector.log;
    double best = INFINITY;
    std::size_t at = 0;
    for (const auto& e : log.epochs)
        if (e.epoch <= tol::kLossDropEpochs && e.train_loss < best) best = e.train_loss, at = e.epoch;
    const double ratio = best / log.initial_train_loss;
    bool finite = std::isfinite(log.initial_train_loss);
    for (const auto& e : log.epochs) finite = finite && std::isfinite(e.train_loss) && std::isfinite(e.valid_loss);

    double epoch5 = NAN;
    for (const auto& e : log.epochs)
        if (e.epoch == 5) epoch5 = e.train_loss;
    const bool fixture =
        std::abs(log.initial_train_loss - tol::kFixtureInitialLoss) <= tol::kFixtureInitialRel * tol::kFixtureInitialLoss &&
        std::abs(epoch5 - tol::kFixtureEpoch5Loss) <= tol::kFixtureEpoch5Rel * tol::kFixtureEpoch5Loss;
    report("6", finite && ratio <= 1.0 - tol::kLossDrop && fixture,
           fmt("training sanity: initial L_Total=%.6g, best within %zu epochs=%.6g at epoch %zu, ratio %.4f (<= %.2f), "
               "all losses finite=%s; fixture initial %.6g +-%.0f%%, epoch 5 %.6g +-%.0f%%: %s",
               log.initial_train_loss, tol::kLossDropEpochs, best, at, ratio, 1.0 - tol::kLossDrop,
               finite ? "yes" : "no", tol::kFixtureInitialLoss, 100 * tol::kFixtureInitialRel, tol::kFixtureEpoch5Loss,
               100 * tol::kFixtureEpoch5Rel, fixture ? "match" : "MISMATCH"));
}

void ablations(const SplitDataset& ds, RunOutcome* full_rerun_out) {
    const char* variants[4] = {"full", "no_temporal", "no_spatial", "no_align"};
    std::map<std::string, std::vector<double>> f1;
    for (std::uint64_t seed : tol::kSeeds) {
        for (const char* v : variants) {
            if (seed == 0 && std::string(v) == "full") {
                // Re-run of the case-study configuration; also feeds the determinism check.
                *full_rerun_out = run_case(ds, case_config(seed, v));
                f1[v].push_back(full_rerun_out->eval.point.f1);
                continue;
            }
            const auto r = run_case(ds, case_config(seed, v));
            f1[v].push_back(r.eval.point.f1);
            std::printf("  ablation seed %llu %-11s F1=%.4f events %zu/%zu (%.1fs)\n", (unsigned long long)seed, v,
                        r.eval.point.f1, r.eval.events_detected, r.eval.events_total, r.seconds);
            std::fflush(stdout);
        }
    }
    auto mean = [](const std::vector<double>& v) {
        double s = 0;
        for (double x : v) s += x / double(v.size());
        return s;
    };
    const double base = mean(f1["full"]);
    bool pass = true;
    std::string detail = fmt("full mean F1=%.4f [%.4f %.4f %.4f]", base, f1["full"][0], f1["full"][1], f1["full"][2]);
    for (const char* v : {"no_temporal", "no_spatial", "no_align"}) {
        const double m = mean(f1[v]);
        pass = pass && m <= base + tol::kAblationMargin;
        detail += fmt("; %s mean F1=%.4f [%.4f %.4f %.4f]", v, m, f1[v][0], f1[v][1], f1[v][2]);
    }
    report("7", pass, fmt("ablation direction over %zu seeds (margin %.2f): ", std::size(tol::kSeeds),
                          tol::kAblationMargin) +
                          detail);
}

void determinism(const SplitDataset& ds, const RunOutcome& a, const RunOutcome& b) {
    const auto root = fs::temp_directory_path() / "madt_acceptance";
    fs::remove_all(root);
    write_reports(root / "a", a.detection, a.detector.sensor_names);
    write_reports(root / "b", b.detection, b.detector.sensor_names);
    bool reports_equal = true;
    std::string files;
    for (const char* f : {"points.csv", "sensors.csv", "events.csv", "event_rankings.csv", "residuals.madt"}) {
        const bool eq = read_bytes(root / "a" / f) == read_bytes(root / "b" / f) && !read_bytes(root / "a" / f).empty();
        reports_equal = reports_equal && eq;
        files += fmt(" %s=%s", f, eq ? "same" : "DIFF");
    }
    save_detector(root / "a.madt", a.detector);
    save_detector(root / "b.madt", b.detector);
    const bool ckpt_equal = read_bytes(root / "a.madt") == read_bytes(root / "b.madt");

    const auto loaded = load_detector(root / "a.madt");
    const auto z = apply_normalization(ds.test.values, loaded.norm);
    const auto windows = prepare_windows(make_windows(z, loaded.config.model.window), loaded.config.tau_t,
                                         loaded.config.tau_s);
    bool forward_equal = true;
    for (const auto& w : windows) {
        const auto o1 = model::forward_values(a.detector.model, w.window, w.pair);
        const auto o2 = model::forward_values(loaded.model, w.window, w.pair);
        forward_equal = forward_equal && o1.x_rec == o2.x_rec && o1.t_rec == o2.t_rec && o1.s_rec == o2.s_rec;
        for (std::size_t k = 0; k < o1.maps.layers(); ++k)
            forward_equal = forward_equal && o1.maps.seri[k] == o2.maps.seri[k] && o1.maps.temp[k] == o2.maps.temp[k] &&
                            o1.maps.space[k] == o2.maps.space[k];
    }
    const bool thresholds_equal = loaded.thresholds.delta_point == a.detector.thresholds.delta_point &&
                                  loaded.thresholds.delta_sensor == a.detector.thresholds.delta_sensor &&
                                  loaded.thresholds.delta_temporal == a.detector.thresholds.delta_temporal;
    fs::remove_all(root);
    report("8", reports_equal && ckpt_equal && forward_equal && thresholds_equal,
           fmt("determinism: two seeded runs give identical reports [") + files +
               fmt(" ], checkpoints %s; round trip over %zu windows: forward %s, thresholds %s",
                   ckpt_equal ? "identical" : "DIFFER", windows.size(), forward_equal ? "bit-identical" : "DIFFERS",
                   thresholds_equal ? "identical" : "DIFFER"));
}

// ---- 9 ----------------------------------------------------------------------

void real_data(const char* name, const char* train_env, const char* test_env, double reference) {
    const char* tr = std::getenv(train_env);
    const char* te = std::getenv(test_env);
    if (!tr || !te) {
        std::printf("SKIP [9-%s] no data supplied (set %s and %s); reference F1 %.2f\n", name, train_env, test_env,
                    reference);
        return;
    }
    try {
        const auto train_series = load_csv(tr);
        const auto test_series = load_csv(te, true);
        auto cfg = TrainConfig::large(train_series.sensors());
        const auto t0 = std::chrono::steady_clock::now();
        const auto d = fit_detector(train_series, cfg);
        const auto det = run_detect(d, test_series, d.thresholds);
        const auto ev = evaluate_detection(det.point_flags, det.events, *test_series.labels, nullptr);
        report("9-" + std::string(name), true,
               fmt("%s large profile: F1=%.2f (reference %.2f, gap %+.2f), %.0fs, non-gating", name,
                   100 * ev.point.f1, reference, 100 * ev.point.f1 - reference, seconds_since(t0)),
               false);
    } catch (const std::exception& e) {
        report("9-" + std::string(name), false, std::string("could not evaluate: ") + e.what(), false);
    }
}

}  // namespace

int main() {
    std::printf("acceptance suite\n");
    gradient_correctness();
    oracle_equivalence();
    algorithm_fidelity();
    distribution_invariants();

    const auto ds = make_case_study(CaseStudy{});
    const auto main_run = run_case(ds, case_config(0, "full"));
    case_study(ds, main_run);
    clean_series(main_run);
    training_sanity(main_run);
    RunOutcome rerun;
    ablations(ds, &rerun);
    determinism(ds, main_run, rerun);

    real_data("SMD", "MADT_SMD_TRAIN", "MADT_SMD_TEST", tol::kSmdF1);
    real_data("PSM", "MADT_PSM_TRAIN", "MADT_PSM_TEST", tol::kPsmF1);

    std::printf("%s: %d gating failure(s)\n", failures ? "FAILED" : "ALL PASSED", failures);
    return failures ? 1 : 0;
}
