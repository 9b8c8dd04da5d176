#pragma once

#include <cstdint>

#include "madt/model/config.hpp"
#include "madt/ndgrad/gradcheck.hpp"

namespace madt::pipeline {

/// Tiny configuration for finite-difference checks: w=8, n=4, d=16, h=2, K=1.
model::ModelConfig gradcheck_config();

/// Central-difference check of every parameter's L_Total gradient in double
/// precision on a random window.
nd::GradCheckReport run_model_gradcheck(std::uint64_t seed, std::size_t probes, double lambda = 19.0,
                                        const model::ModelConfig& cfg = gradcheck_config());

}  // namespace madt::pipeline
