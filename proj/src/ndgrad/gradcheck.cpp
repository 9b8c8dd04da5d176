#include "madt/ndgrad/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace madt::nd {

GradCheckReport check_gradients(const NamedParams& params, const std::function<double()>& loss,
                                const std::function<void()>& loss_with_grad, const GradCheckOptions& opts) {
    for (auto& [name, p] : params) p->grad.clear();
    loss_with_grad();

    std::vector<std::size_t> offsets;
    std::size_t total = 0;
    for (auto& [name, p] : params) {
        if (!p->has_grad()) throw ContractError("gradcheck: parameter " + name + " received no gradient");
        offsets.push_back(total);
        total += p->size();
    }
    if (total == 0) throw ContractError("gradcheck: no parameters");

    GradCheckReport report;
    std::mt19937_64 rng(opts.seed);
    std::uniform_int_distribution<std::size_t> pick(0, total - 1);
    for (std::size_t k = 0; k < opts.probes; ++k) {
        // The first probes visit each tensor once so no parameter goes unchecked.
        std::size_t flat = pick(rng);
        if (opts.cover_all && k < params.size()) {
            std::uniform_int_distribution<std::size_t> within(0, params[k].second->size() - 1);
            flat = offsets[k] + within(rng);
        }
        const auto it = std::upper_bound(offsets.begin(), offsets.end(), flat);
        const std::size_t which = std::size_t(it - offsets.begin()) - 1;
        auto& [name, p] = params[which];
        const std::size_t idx = flat - offsets[which];

        double& x = p->data()[idx];
        const double saved = x;
        x = saved + opts.step;
        const double up = loss();
        x = saved - opts.step;
        const double down = loss();
        x = saved;

        GradProbe probe;
        probe.param = name;
        probe.index = idx;
        probe.analytic = p->grad[idx];
        probe.numeric = (up - down) / (2.0 * opts.step);
        const double denom = std::max({std::abs(probe.analytic), std::abs(probe.numeric), opts.floor});
        probe.rel_err = std::abs(probe.analytic - probe.numeric) / denom;
        report.max_rel_err = std::max(report.max_rel_err, probe.rel_err);
        report.probes.push_back(probe);
    }
    report.passed = report.max_rel_err <= opts.tolerance;
    return report;
}

}  // namespace madt::nd
