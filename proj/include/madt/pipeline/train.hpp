#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "madt/model/state.hpp"
#include "madt/pipeline/config.hpp"
#include "madt/statemat/state_matrix.hpp"

namespace madt::pipeline {

/// Training and inference run in single precision; gradient checks use double.
using TrainReal = float;
using TrainState = model::ModelState<TrainReal>;

/// A window with its state matrices, pre-cast for the model.
struct PreparedWindow {
    statemat::TimeWindow window;
    statemat::StateMatrixPair pair;
    nd::Tensor2<TrainReal> x, t, s;
};

std::vector<PreparedWindow> prepare_windows(const std::vector<statemat::TimeWindow>& windows, double tau_t,
                                            double tau_s);

struct AdamState {
    std::uint64_t step = 0;
    std::vector<nd::Tensor2<TrainReal>> m, v;
};

struct EpochRecord {
    std::size_t epoch = 0;     // 1-based, continues across resumes
    double train_loss = 0;     // mean batch L_Total over the epoch
    double valid_loss = 0;     // mean L_Total over validation windows after the epoch
    std::uint64_t adam_step = 0;
};

struct TrainLog {
    double initial_train_loss = 0;  // mean L_Total before any update
    double initial_valid_loss = 0;
    std::vector<EpochRecord> epochs;
    std::size_t best_epoch = 0;
    bool early_stopped = false;
};

struct TrainResult {
    TrainState model;  // best-validation parameters
    AdamState adam;    // optimizer state that produced `model`
    TrainLog log;
};

/// Mean L_Total over windows (forward only).
double mean_loss(const TrainState& model, const std::vector<PreparedWindow>& windows, double lambda);

/// Seeded shuffle per epoch, batch-mean L_Total, Adam. Early stops on the
/// validation loss and returns the best-validation state. With `resume` the
/// parameters, optimizer moments and step counter carry on from it.
TrainResult train(const std::vector<PreparedWindow>& train_windows, const std::vector<PreparedWindow>& valid_windows,
                  const TrainConfig& cfg, const TrainResult* resume = nullptr,
                  const std::function<void(const EpochRecord&)>& on_epoch = {});

}  // namespace madt::pipeline
