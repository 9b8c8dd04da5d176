#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "madt/errors.hpp"
#include "madt/model/container.hpp"
#include "madt/pipeline/detect.hpp"
#include "madt/pipeline/selfcheck.hpp"
#include "madt/pipeline/synth.hpp"

namespace fs = std::filesystem;
using namespace madt;
using namespace madt::pipeline;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

struct ThresholdFlags {
    std::optional<std::string> rule;
    std::optional<double> r;
    std::optional<double> beta;

    bool any() const { return rule || r || beta; }
    diagnosis::ThresholdParams apply(diagnosis::ThresholdParams p) const {
        if (rule) p.rule = diagnosis::parse_rule(*rule);
        if (r) p.r = *r;
        if (beta) p.beta = *beta;
        return p;
    }
};

void add_threshold_flags(CLI::App* app, ThresholdFlags& f) {
    app->add_option("--threshold-rule", f.rule, "ratio or betamax")->check(CLI::IsMember({"ratio", "betamax"}));
    app->add_option("--r", f.r, "fraction of validation points above the ratio threshold");
    app->add_option("--beta", f.beta, "multiplier of the validation maximum, in [1, 2]");
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

int cmd_synth(const std::optional<std::string>& config, std::optional<std::uint64_t> seed, const fs::path& out) {
    fs::create_directories(out);
    SynthSpec spec;
    if (config) {
        std::ifstream f(*config);
        if (!f) throw InputError("cannot open " + *config);
        std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
        spec = parse_synth_spec(text);
    } else {
        spec = CaseStudy{}.spec();
    }
    if (seed) spec.seed = *seed;
    if (spec.train_length == 0) {
        const auto res = synth_generate(spec);
        save_csv(out / "series.csv", res.series);
        save_truth_events((out / "truth_events.csv").string(), res.events);
    } else {
        const auto ds = generate_split(spec);
        save_csv(out / "train.csv", ds.train);
        save_csv(out / "test.csv", ds.test);
        save_truth_events((out / "truth_events.csv").string(), ds.test_events);
    }
    std::cout << "wrote dataset to " << out.string() << '\n';
    return kOk;
}

int cmd_train(const std::string& data, const std::optional<std::string>& config, std::optional<std::uint64_t> seed,
              const fs::path& out, const ThresholdFlags& th, const std::optional<std::string>& resume) {
    const Series series = load_csv(data);
    KeyValues kv = config ? load_key_values(*config) : KeyValues{};
    TrainConfig cfg = TrainConfig::from_map(kv, series.sensors());
    if (seed) cfg.seed = *seed;
    cfg.threshold = th.apply(cfg.threshold);
    cfg.validate();

    std::optional<Detector> prior;
    if (resume) prior = load_detector(*resume);

    fs::create_directories(out);
    std::ofstream log(out / "train_log.csv", std::ios::binary);
    log << "epoch,train_loss,valid_loss,adam_step\n";
    const auto on_epoch = [&](const EpochRecord& e) {
        log << e.epoch << ',' << fmt(e.train_loss) << ',' << fmt(e.valid_loss) << ',' << e.adam_step << '\n';
        std::cout << "epoch " << e.epoch << "  train " << e.train_loss << "  valid " << e.valid_loss << std::endl;
    };
    const auto warn = [](const std::string& m) { std::cerr << "warning: " << m << '\n'; };
    const Detector d = fit_detector(series, cfg, on_epoch, warn, prior ? &*prior : nullptr);
    save_detector(out / "model.madt", d);
    std::cout << "initial loss " << d.log.initial_train_loss << ", best epoch " << d.log.best_epoch << '\n'
              << "thresholds point " << d.thresholds.delta_point << " sensor " << d.thresholds.delta_sensor
              << " temporal " << d.thresholds.delta_temporal << '\n'
              << "checkpoint " << (out / "model.madt").string() << '\n';
    return kOk;
}

int cmd_detect(const std::string& checkpoint, const std::string& data, const fs::path& out, const ThresholdFlags& th,
               const std::optional<std::string>& truth) {
    Detector d = load_detector(checkpoint);
    if (th.any()) d.recalibrate(th.apply(d.thresholds.params));
    const Series series = load_csv(data);
    const Detection det = run_detect(d, series, d.thresholds);
    write_reports(out, det, d.sensor_names);
    std::cout << det.events.size() << " event(s); reports in " << out.string() << '\n';
    if (series.labels) {
        std::vector<TruthEvent> te;
        if (truth) te = load_truth_events(*truth);
        std::cout << format_metrics(evaluate_detection(det.point_flags, det.events, *series.labels, truth ? &te : nullptr));
    }
    return kOk;
}

int cmd_eval(const std::string& report, const std::string& data, const std::optional<std::string>& truth) {
    const auto rep = read_reports(report);
    const Series series = load_csv(data, true);
    std::vector<TruthEvent> te;
    if (truth) te = load_truth_events(*truth);
    std::cout << format_metrics(evaluate_detection(rep.point_flags, rep.events, *series.labels, truth ? &te : nullptr));
    return kOk;
}

int cmd_gradcheck(std::optional<std::uint64_t> seed, std::size_t probes) {
    const auto r = run_model_gradcheck(seed.value_or(0), probes);
    std::cout << "probes:" << r.probes.size() << '\n' << "max_rel_err:" << fmt(r.max_rel_err) << '\n'
              << "status:" << (r.passed ? "pass" : "fail") << '\n';
    return r.passed ? kOk : kNumeric;
}

void write_matrix_csv(const fs::path& path, const nd::Matrix& m) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw InputError("cannot write " + path.string());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) f << (j ? "," : "") << fmt(m(i, j));
        f << '\n';
    }
}

int cmd_plotdata(const std::string& report, const fs::path& out) {
    fs::create_directories(out);
    const auto rep = read_reports(report);
    {
        std::ofstream f(out / "score_trace.csv", std::ios::binary);
        f << "timestep,score,flag\n";
        for (std::size_t i = 0; i < rep.point_scores.size(); ++i)
            f << i << ',' << fmt(rep.point_scores[i]) << ',' << int(rep.point_flags[i]) << '\n';
    }
    const auto c = model::read_container(fs::path(report) / "residuals.madt");
    for (const auto& [name, any] : c.tensors) {
        std::string file = name;
        for (auto& ch : file)
            if (ch == '.') ch = '_';
        write_matrix_csv(out / (file + ".csv"), c.get<double>(name));
    }
    std::cout << "wrote " << c.tensors.size() + 1 << " file(s) to " << out.string() << '\n';
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multivariate time-series anomaly detection, localization and severity grading"};
    app.require_subcommand(1);

    std::optional<std::string> config, resume, truth;
    std::optional<std::uint64_t> seed;
    std::string out = ".", data, checkpoint, report;
    std::size_t probes = 200;
    ThresholdFlags th;

    auto* synth = app.add_subcommand("synth", "generate a synthetic coupled-tank dataset");
    synth->add_option("--config", config, "synth spec (key = value)");
    synth->add_option("--seed", seed, "random seed");
    synth->add_option("--out", out, "output directory");

    auto* train = app.add_subcommand("train", "train a model and calibrate thresholds");
    train->add_option("--data", data, "training CSV")->required();
    train->add_option("--config", config, "training config (key = value)");
    train->add_option("--seed", seed, "random seed");
    train->add_option("--out", out, "output directory");
    train->add_option("--resume", resume, "checkpoint to continue from");
    add_threshold_flags(train, th);

    auto* detect = app.add_subcommand("detect", "score a series and write reports");
    detect->add_option("--checkpoint", checkpoint, "trained model")->required();
    detect->add_option("--data", data, "series CSV")->required();
    detect->add_option("--out", out, "report directory");
    detect->add_option("--truth", truth, "truth events CSV (enables recall@3)");
    add_threshold_flags(detect, th);

    auto* eval = app.add_subcommand("eval", "score a report against labels");
    eval->add_option("--report", report, "report directory from detect")->required();
    eval->add_option("--data", data, "labelled CSV")->required();
    eval->add_option("--truth", truth, "truth events CSV (enables recall@3)");

    auto* grad = app.add_subcommand("gradcheck", "finite-difference gradient check on a tiny model");
    grad->add_option("--seed", seed, "random seed");
    grad->add_option("--probes", probes, "number of sampled coordinates");

    auto* plot = app.add_subcommand("plotdata", "emit score trace and residual matrices as CSV");
    plot->add_option("--report", report, "report directory from detect")->required();
    plot->add_option("--out", out, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        std::cerr << "error: " << e.what() << "\n\n";
        const auto subs = app.get_subcommands();
        std::cerr << (subs.empty() ? app.help() : subs.front()->help());
        return kUsage;
    }

    try {
        if (*synth) return cmd_synth(config, seed, out);
        if (*train) return cmd_train(data, config, seed, out, th, resume);
        if (*detect) return cmd_detect(checkpoint, data, out, th, truth);
        if (*eval) return cmd_eval(report, data, truth);
        if (*grad) return cmd_gradcheck(seed, probes);
        if (*plot) return cmd_plotdata(report, out);
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << '\n';
        return kNumeric;
    } catch (const ContractError& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return kNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kData;
    }
    return kUsage;
}
