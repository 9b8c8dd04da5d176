#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "madt/model/config.hpp"
#include "madt/ndgrad/tensor.hpp"

namespace madt::model {

enum class Branch { series = 0, temporal = 1, spatial = 2 };

const char* branch_name(Branch b);

template <typename Real>
struct Linear {
    nd::Tensor2<Real> weight;  // in × out
    nd::Tensor2<Real> bias;    // 1 × out
};

template <typename Real>
struct NormParams {
    nd::Tensor2<Real> gain;
    nd::Tensor2<Real> bias;
};

/// Three position-wise affine maps (kernel-1 convolutions) with GELU between.
template <typename Real>
struct Encoder {
    std::array<Linear<Real>, 3> stages;
};

/// Per-branch projections of one attention block: Q/K/V are d×d without bias,
/// the output projection is affine.
template <typename Real>
struct AttentionParams {
    nd::Tensor2<Real> wq, wk, wv;
    Linear<Real> out;
};

template <typename Real>
struct BranchLayer {
    AttentionParams<Real> attn;
    NormParams<Real> norm1;
    Linear<Real> ff_up;
    Linear<Real> ff_down;
    NormParams<Real> norm2;
};

template <typename Real>
struct Layer {
    std::array<BranchLayer<Real>, 3> branch;  // indexed by Branch
};

template <typename Real>
using NamedTensors = std::vector<std::pair<std::string, nd::Tensor2<Real>*>>;
template <typename Real>
using ConstNamedTensors = std::vector<std::pair<std::string, const nd::Tensor2<Real>*>>;

/// All learnable parameters. Parameters of disabled branches are allocated
/// but excluded from `parameters()`.
template <typename Real>
struct ModelState {
    ModelConfig config;
    std::array<Encoder<Real>, 3> encoders;
    std::vector<Layer<Real>> layers;
    std::array<Linear<Real>, 3> heads;  // x̃ (d→n), T̃ (d→w), S̃ (d→n)

    /// Seeded uniform(±1/√fan_in) weights and biases; layer norms start at
    /// gain 1, bias 0.
    static ModelState initialize(const ModelConfig& cfg, std::uint64_t seed);

    bool branch_enabled(Branch b) const;

    /// Stable, ordered list of active parameters with dotted names.
    NamedTensors<Real> parameters(bool include_disabled = false);
    ConstNamedTensors<Real> parameters(bool include_disabled = false) const;
    std::vector<nd::Tensor2<Real>*> parameter_ptrs();

    void zero_grad();
};

extern template struct ModelState<float>;
extern template struct ModelState<double>;

/// Copies parameter values between precisions (same config).
template <typename To, typename From>
ModelState<To> convert_state(const ModelState<From>& src);

}  // namespace madt::model
