#include "madt/pipeline/selfcheck.hpp"

#include <random>

#include "madt/losses/losses.hpp"
#include "madt/model/forward.hpp"
#include "madt/statemat/state_matrix.hpp"

namespace madt::pipeline {

model::ModelConfig gradcheck_config() {
    model::ModelConfig c;
    c.window = 8;
    c.sensors = 4;
    c.d_model = 16;
    c.heads = 2;
    c.layers = 1;
    return c;
}

nd::GradCheckReport run_model_gradcheck(std::uint64_t seed, std::size_t probes, double lambda,
                                        const model::ModelConfig& cfg) {
    auto state = model::ModelState<double>::initialize(cfg, seed);
    std::mt19937_64 rng(seed ^ 0x5DEECE66DULL);
    std::normal_distribution<double> gauss(0.0, 1.0);
    statemat::TimeWindow win;
    win.values = nd::Matrix(cfg.window, cfg.sensors);
    for (auto& v : win.values.storage()) v = gauss(rng);
    const auto pair = statemat::build_state_matrices(win);

    auto run = [&](bool with_grad) {
        nd::Tape<double> tape;
        const auto g = model::forward(tape, state, win.values, pair.temporal, pair.spatial);
        const auto lt = losses::total_loss(g, tape.watch(win.values), tape.watch(pair.temporal),
                                           tape.watch(pair.spatial), lambda);
        if (with_grad) {
            state.zero_grad();
            tape.backward(lt.total);
        }
        return lt.total.value()(0, 0);
    };

    nd::NamedParams params;
    for (auto& [name, p] : state.parameters()) params.emplace_back(name, p);
    nd::GradCheckOptions opts;
    opts.probes = probes;
    opts.seed = seed;
    return nd::check_gradients(params, [&] { return run(false); }, [&] { run(true); }, opts);
}

}  // namespace madt::pipeline
