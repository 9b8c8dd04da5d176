#include "madt/pipeline/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "madt/errors.hpp"
#include "madt/pipeline/config.hpp"

namespace madt::pipeline {
namespace {

constexpr std::size_t kChannels = 7;
constexpr std::size_t kWarmup = 2000;

const char* const kChannelNames[kChannels] = {"level1", "level2", "inflow", "transfer", "outflow", "valve", "temp"};

// Clean plant trajectory before measurement noise, `length` × 7.
nd::Matrix simulate_plant(std::size_t length, double disturbance, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double area1 = 10.0, area2 = 10.0, pump_gain = 0.1, c12 = 0.05, c_out = 0.1;
    const double two_pi = 2.0 * std::numbers::pi;
    double h1 = 2.0, h2 = 1.0, dist = 0.0;

    nd::Matrix out(length, kChannels);
    for (std::size_t k = 0; k < length + kWarmup; ++k) {
        const double t = double(k);
        const double square = std::fmod(t, 1300.0) < 650.0 ? 1.0 : -1.0;
        dist = 0.99 * dist + disturbance * gauss(rng);
        const double pump = 0.5 + 0.2 * std::sin(two_pi * t / 300.0) + 0.1 * square + dist;
        const double valve = 0.5 + 0.15 * std::sin(two_pi * t / 700.0 + 1.0);

        const double inflow = pump_gain * std::max(pump, 0.0);
        const double dh = h1 - h2;
        const double transfer = c12 * std::copysign(std::sqrt(std::abs(dh)), dh);
        const double outflow = c_out * valve * std::sqrt(std::max(h2, 0.0));
        const double temp = 20.0 + 2.0 * std::sin(two_pi * t / 5000.0) + 0.5 * h1;

        if (k >= kWarmup) {
            const std::size_t i = k - kWarmup;
            const double row[kChannels] = {h1, h2, inflow, transfer, outflow, valve, temp};
            for (std::size_t j = 0; j < kChannels; ++j) out(i, j) = row[j];
        }
        h1 = std::max(h1 + (inflow - transfer) / area1, 0.0);
        h2 = std::max(h2 + (transfer - outflow) / area2, 0.0);
    }
    return out;
}

std::vector<std::size_t> parse_sensor_list(const std::string& s) {
    std::vector<std::size_t> out;
    std::istringstream in(s);
    std::string tok;
    while (std::getline(in, tok, ';')) out.push_back(std::stoul(tok));
    return out;
}

}  // namespace

void SynthSpec::validate() const {
    if (sensors < 2) throw ParameterError("synth: at least 2 sensors are required");
    if (length == 0) throw ParameterError("synth: length must be positive");
    if (noise < 0 || disturbance < 0) throw ParameterError("synth: noise scales must be >= 0");
    if (train_length > length) throw ParameterError("synth: train_length exceeds length");
    std::vector<const Injection*> sorted;
    for (const auto& inj : injections) {
        if (inj.duration == 0) throw ParameterError("synth: injection duration must be positive");
        if (inj.start + inj.duration > length) throw ParameterError("synth: injection extends past the series end");
        if (inj.sensors.empty()) throw ParameterError("synth: injection names no sensors");
        for (auto s : inj.sensors)
            if (s >= sensors) throw ParameterError("synth: injection sensor index out of range");
        sorted.push_back(&inj);
    }
    std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->start < b->start; });
    for (std::size_t i = 1; i < sorted.size(); ++i)
        if (sorted[i]->start < sorted[i - 1]->start + sorted[i - 1]->duration)
            throw ParameterError("synth: injections overlap");
}

SynthResult synth_generate(const SynthSpec& spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    // Channels beyond the seven physical ones are mixtures of them.
    const nd::Matrix plant = simulate_plant(spec.length, spec.disturbance, rng);
    nd::Matrix clean(spec.length, spec.sensors);
    std::vector<std::size_t> extra_src(spec.sensors > kChannels ? spec.sensors - kChannels : 0);
    for (std::size_t j = 0; j < spec.sensors; ++j) {
        if (j < kChannels) {
            for (std::size_t i = 0; i < spec.length; ++i) clean(i, j) = plant(i, j);
        } else {
            const std::size_t a = j % kChannels, b = (j * 3 + 1) % kChannels;
            for (std::size_t i = 0; i < spec.length; ++i) clean(i, j) = plant(i, a) + 0.5 * plant(i, b);
        }
    }

    std::vector<double> scale(spec.sensors);
    for (std::size_t j = 0; j < spec.sensors; ++j) {
        double m = 0, v = 0;
        for (std::size_t i = 0; i < spec.length; ++i) m += clean(i, j);
        m /= double(spec.length);
        for (std::size_t i = 0; i < spec.length; ++i) v += (clean(i, j) - m) * (clean(i, j) - m);
        scale[j] = std::max(std::sqrt(v / double(spec.length)), 1e-9);
    }

    SynthResult res;
    Series& s = res.series;
    for (std::size_t j = 0; j < spec.sensors; ++j)
        s.sensor_names.push_back(j < kChannels ? kChannelNames[j] : "mix" + std::to_string(j));
    s.values = clean;
    for (std::size_t i = 0; i < spec.length; ++i)
        for (std::size_t j = 0; j < spec.sensors; ++j) s.values(i, j) += spec.noise * scale[j] * gauss(rng);

    std::vector<int> labels(spec.length, 0);
    for (const auto& inj : spec.injections) {
        for (auto j : inj.sensors) {
            const double held = s.values(inj.start, j);
            for (std::size_t i = inj.start; i < inj.start + inj.duration; ++i) {
                if (inj.kind == InjectionKind::offset)
                    s.values(i, j) += inj.magnitude * scale[j];
                else
                    s.values(i, j) = held;
            }
        }
        for (std::size_t i = inj.start; i < inj.start + inj.duration; ++i) labels[i] = 1;
        res.events.push_back({inj.start, inj.duration, inj.sensors});
    }
    s.labels = std::move(labels);
    return res;
}

SynthSpec CaseStudy::spec() const {
    SynthSpec sp;
    sp.sensors = 7;
    sp.length = train_length + test_length;
    sp.seed = seed;
    sp.train_length = train_length;
    // Durations out of time order so severity ordering is not just arrival order.
    const std::size_t durations[6] = {30, 10, 60, 20, 50, 40};
    const std::vector<std::size_t> pairs[6] = {{0, 2}, {1, 4}, {3, 5}, {2, 6}, {0, 5}, {1, 3}};
    const std::size_t windows = test_length / window;
    const std::size_t stride = windows / 6;
    for (std::size_t e = 0; e < 6; ++e) {
        Injection inj;
        inj.start = train_length + (stride / 2 + e * stride) * window + window / 5;
        inj.duration = durations[e];
        inj.sensors = pairs[e];
        inj.magnitude = magnitude;
        sp.injections.push_back(inj);
    }
    return sp;
}

SplitDataset generate_split(const SynthSpec& spec) {
    if (spec.train_length == 0) throw ParameterError("generate_split: train_length must be positive");
    const auto res = synth_generate(spec);
    SplitDataset out;
    out.train = slice(res.series, 0, spec.train_length);
    out.test = slice(res.series, spec.train_length, spec.length);
    for (auto ev : res.events) {
        if (ev.start < spec.train_length) throw ParameterError("generate_split: injection inside the training span");
        ev.start -= spec.train_length;
        out.test_events.push_back(ev);
    }
    return out;
}

SplitDataset make_case_study(const CaseStudy& cs) {
    if (cs.window == 0 || cs.test_length / cs.window < 6) throw ParameterError("case study: test span too short");
    return generate_split(cs.spec());
}

SynthSpec parse_synth_spec(const std::string& text) {
    const KeyValues kv = parse_key_values(text);
    static const char* known[] = {"sensors", "length", "noise", "disturbance", "seed", "train_length", "inject"};
    for (const auto& [k, v] : kv)
        if (std::find(std::begin(known), std::end(known), k) == std::end(known))
            throw ConfigError("unknown synth key '" + k + "'");
    SynthSpec sp;
    sp.sensors = kv_size(kv, "sensors", sp.sensors);
    sp.length = kv_size(kv, "length", sp.length);
    sp.noise = kv_double(kv, "noise", sp.noise);
    sp.disturbance = kv_double(kv, "disturbance", sp.disturbance);
    sp.seed = kv_u64(kv, "seed", sp.seed);
    sp.train_length = kv_size(kv, "train_length", sp.train_length);
    if (auto it = kv.find("inject"); it != kv.end()) {
        std::istringstream lines(it->second);
        std::string line;
        while (std::getline(lines, line)) {
            std::vector<std::string> f;
            std::istringstream in(line);
            std::string tok;
            while (std::getline(in, tok, ',')) f.push_back(tok);
            if (f.size() < 3 || f.size() > 5)
                throw ConfigError("inject expects start,duration,sensors[,magnitude[,kind]]: '" + line + "'");
            Injection inj;
            try {
                inj.start = std::stoul(f[0]);
                inj.duration = std::stoul(f[1]);
                inj.sensors = parse_sensor_list(f[2]);
                if (f.size() > 3) inj.magnitude = std::stod(f[3]);
            } catch (const std::exception&) {
                throw ConfigError("malformed inject entry '" + line + "'");
            }
            if (f.size() > 4) {
                if (f[4] == "offset") inj.kind = InjectionKind::offset;
                else if (f[4] == "stuck") inj.kind = InjectionKind::stuck;
                else throw ConfigError("inject kind must be offset or stuck");
            }
            sp.injections.push_back(inj);
        }
    }
    try {
        sp.validate();
    } catch (const ParameterError& e) {
        throw ConfigError(e.what());
    }
    return sp;
}

void save_truth_events(const std::string& path, const std::vector<TruthEvent>& events) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw InputError("cannot write " + path);
    f << "event_id,start,duration,sensors\n";
    for (std::size_t e = 0; e < events.size(); ++e) {
        f << e << ',' << events[e].start << ',' << events[e].duration << ',';
        for (std::size_t k = 0; k < events[e].sensors.size(); ++k) f << (k ? ";" : "") << events[e].sensors[k];
        f << '\n';
    }
}

std::vector<TruthEvent> load_truth_events(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw InputError("cannot open " + path);
    std::string line;
    std::getline(f, line);
    std::vector<TruthEvent> out;
    std::size_t lineno = 1;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> c;
        std::istringstream in(line);
        std::string tok;
        while (std::getline(in, tok, ',')) c.push_back(tok);
        if (c.size() != 4) throw ParseError("truth events: expected 4 cells", lineno);
        try {
            out.push_back({std::stoul(c[1]), std::stoul(c[2]), parse_sensor_list(c[3])});
        } catch (const std::exception&) {
            throw ParseError("truth events: malformed row", lineno);
        }
    }
    return out;
}

}  // namespace madt::pipeline
