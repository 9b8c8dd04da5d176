#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "madt/ndgrad/tensor.hpp"

namespace madt::nd {

struct GradProbe {
    std::string param;
    std::size_t index = 0;
    double analytic = 0;
    double numeric = 0;
    double rel_err = 0;
};

struct GradCheckReport {
    std::vector<GradProbe> probes;
    double max_rel_err = 0;
    bool passed = false;
};

struct GradCheckOptions {
    std::size_t probes = 100;
    double step = 1e-4;
    double tolerance = 1e-3;
    // Denominator floor: |a - n| / max(|a|, |n|, floor).
    double floor = 1e-8;
    std::uint64_t seed = 0;
    bool cover_all = true;
};

using NamedParams = std::vector<std::pair<std::string, Tensor2<double>*>>;

/// Compares analytic gradients against central finite differences at
/// randomly chosen coordinates (uniform over all parameter entries).
/// `loss` evaluates the scalar loss from the current parameter values;
/// `loss_with_grad` does the same and populates every parameter's grad.
GradCheckReport check_gradients(const NamedParams& params, const std::function<double()>& loss,
                                const std::function<void()>& loss_with_grad, const GradCheckOptions& opts);

}  // namespace madt::nd
