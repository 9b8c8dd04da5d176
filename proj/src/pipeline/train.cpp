#include "madt/pipeline/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "madt/errors.hpp"
#include "madt/losses/losses.hpp"
#include "madt/model/forward.hpp"
#include "madt/ndgrad/adam.hpp"
#include "madt/ndgrad/ops.hpp"

namespace madt::pipeline {
namespace {

using Var = nd::Var<TrainReal>;

bool finite(const nd::Tensor2<TrainReal>& t) {
    return std::all_of(t.data().begin(), t.data().end(), [](TrainReal v) { return std::isfinite(v); });
}

// Name of the first non-finite tensor in forward order, for the abort message.
std::string first_nonfinite(const PreparedWindow& w, const model::ForwardGraph<TrainReal>& g,
                            const losses::LossTerms<TrainReal>& lt) {
    std::vector<std::pair<std::string, Var>> order;
    for (std::size_t k = 0; k < g.maps.size(); ++k) {
        const std::string p = "layer" + std::to_string(k) + ".";
        order.emplace_back(p + "seri_map", g.maps[k].seri);
        order.emplace_back(p + "temp_map", g.maps[k].temp);
        order.emplace_back(p + "space_map", g.maps[k].space);
    }
    order.insert(order.end(), {{"x_rec", g.x_rec}, {"t_rec", g.t_rec}, {"s_rec", g.s_rec},
                               {"recon_x", lt.recon_x}, {"recon_t", lt.recon_t}, {"recon_s", lt.recon_s},
                               {"align_seri_temp", lt.align_st}, {"align_seri_space", lt.align_ssp},
                               {"align_temp_space", lt.align_tsp}, {"total", lt.total}});
    if (!finite(w.x)) return "input x (window at " + std::to_string(w.window.start_index) + ")";
    if (!finite(w.t)) return "input T";
    if (!finite(w.s)) return "input S";
    for (const auto& [name, v] : order)
        if (v.valid() && !finite(v.value())) return name;
    return "total";
}

double window_loss(const TrainState& model, const PreparedWindow& w, double lambda) {
    nd::Tape<TrainReal> tape;
    const auto g = model::forward(tape, model, w.x, w.t, w.s);
    const auto lt = losses::total_loss(g, tape.watch(w.x), tape.watch(w.t), tape.watch(w.s), lambda);
    const double v = lt.total.value()(0, 0);
    if (!std::isfinite(v))
        throw NumericError("non-finite loss at window " + std::to_string(w.window.start_index) + ": first non-finite "
                           "tensor is " + first_nonfinite(w, g, lt));
    return v;
}

}  // namespace

std::vector<PreparedWindow> prepare_windows(const std::vector<statemat::TimeWindow>& windows, double tau_t,
                                            double tau_s) {
    std::vector<PreparedWindow> out;
    out.reserve(windows.size());
    for (const auto& w : windows) {
        w.validate();
        PreparedWindow p;
        p.window = w;
        p.pair = statemat::build_state_matrices(w, tau_t, tau_s);
        p.x = w.values.cast<TrainReal>();
        p.t = p.pair.temporal.cast<TrainReal>();
        p.s = p.pair.spatial.cast<TrainReal>();
        out.push_back(std::move(p));
    }
    return out;
}

double mean_loss(const TrainState& model, const std::vector<PreparedWindow>& windows, double lambda) {
    if (windows.empty()) throw InputError("mean_loss: no windows");
    double acc = 0;
    for (const auto& w : windows) acc += window_loss(model, w, lambda);
    return acc / double(windows.size());
}

TrainResult train(const std::vector<PreparedWindow>& train_windows, const std::vector<PreparedWindow>& valid_windows,
                  const TrainConfig& cfg, const TrainResult* resume,
                  const std::function<void(const EpochRecord&)>& on_epoch) {
    cfg.validate();
    if (train_windows.empty()) throw InputError("train: no training windows");
    if (valid_windows.empty()) throw InputError("train: no validation windows");

    TrainResult cur;
    cur.model = resume ? resume->model : TrainState::initialize(cfg.model, cfg.seed);
    if (resume) cur.log = resume->log;
    nd::Adam<TrainReal> opt(cur.model.parameter_ptrs(), {cfg.lr, 0.9, 0.999, 1e-8});
    if (resume && resume->adam.step > 0) opt.restore(resume->adam.step, resume->adam.m, resume->adam.v);

    auto snapshot = [&] {
        TrainResult r;
        r.model = cur.model;
        r.adam = {opt.step_count(), opt.first_moments(), opt.second_moments()};
        return r;
    };

    double best_valid = std::numeric_limits<double>::infinity();
    if (!resume) {
        cur.log.initial_train_loss = mean_loss(cur.model, train_windows, cfg.lambda);
        cur.log.initial_valid_loss = mean_loss(cur.model, valid_windows, cfg.lambda);
    } else {
        for (const auto& e : cur.log.epochs) best_valid = std::min(best_valid, e.valid_loss);
    }
    TrainResult best = snapshot();

    std::vector<std::size_t> order(train_windows.size());
    std::size_t since_best = 0;
    const std::size_t first_epoch = cur.log.epochs.size() + 1;
    for (std::size_t epoch = first_epoch; epoch < first_epoch + cfg.max_epochs; ++epoch) {
        std::iota(order.begin(), order.end(), 0);
        std::mt19937_64 rng(cfg.seed * 0x9E3779B97F4A7C15ULL + epoch);
        std::shuffle(order.begin(), order.end(), rng);

        double epoch_loss = 0;
        std::size_t batches = 0;
        for (std::size_t b0 = 0; b0 < order.size(); b0 += cfg.batch) {
            const std::size_t b1 = std::min(order.size(), b0 + cfg.batch);
            const TrainReal inv = TrainReal(1) / TrainReal(b1 - b0);
            double batch_loss = 0;
            for (std::size_t i = b0; i < b1; ++i) {
                const auto& w = train_windows[order[i]];
                nd::Tape<TrainReal> tape;
                const auto g = model::forward(tape, cur.model, w.x, w.t, w.s);
                const auto lt = losses::total_loss(g, tape.watch(w.x), tape.watch(w.t), tape.watch(w.s), cfg.lambda);
                const double v = lt.total.value()(0, 0);
                if (!std::isfinite(v))
                    throw NumericError("non-finite loss in epoch " + std::to_string(epoch) + " at window " +
                                       std::to_string(w.window.start_index) + ": first non-finite tensor is " +
                                       first_nonfinite(w, g, lt));
                batch_loss += v;
                tape.backward(nd::scale(lt.total, inv));
            }
            opt.step();
            epoch_loss += batch_loss / double(b1 - b0);
            ++batches;
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = epoch_loss / double(batches);
        rec.valid_loss = mean_loss(cur.model, valid_windows, cfg.lambda);
        rec.adam_step = opt.step_count();
        cur.log.epochs.push_back(rec);
        if (on_epoch) on_epoch(rec);

        if (rec.valid_loss < best_valid) {
            best_valid = rec.valid_loss;
            best = snapshot();
            cur.log.best_epoch = epoch;
            since_best = 0;
        } else {
            ++since_best;
        }
        if (since_best >= cfg.patience) {
            cur.log.early_stopped = epoch + 1 < first_epoch + cfg.max_epochs;
            break;
        }
    }
    best.log = cur.log;
    return best;
}

}  // namespace madt::pipeline
