#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "madt/ndgrad/tensor.hpp"

namespace madt::nd {

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Adam with bias correction. Moments are kept per parameter, in the order
/// the parameters were registered.
template <typename Real>
class Adam {
public:
    Adam(std::vector<Tensor2<Real>*> params, AdamConfig cfg);

    /// Applies one update from the populated gradients, then releases them.
    /// Throws ContractError if any parameter has no gradient.
    void step();

    std::uint64_t step_count() const noexcept { return t_; }
    const AdamConfig& config() const noexcept { return cfg_; }
    void set_lr(double lr) noexcept { cfg_.lr = lr; }

    const std::vector<Tensor2<Real>>& first_moments() const noexcept { return m_; }
    const std::vector<Tensor2<Real>>& second_moments() const noexcept { return v_; }
    /// Restores optimizer state (e.g. from a checkpoint). Shapes must match.
    void restore(std::uint64_t t, std::vector<Tensor2<Real>> m, std::vector<Tensor2<Real>> v);

private:
    std::vector<Tensor2<Real>*> params_;
    AdamConfig cfg_;
    std::vector<Tensor2<Real>> m_;
    std::vector<Tensor2<Real>> v_;
    std::uint64_t t_ = 0;
};

extern template class Adam<float>;
extern template class Adam<double>;

}  // namespace madt::nd
