#include "madt/ndgrad/adam.hpp"

#include <cmath>

namespace madt::nd {

template <typename Real>
Adam<Real>::Adam(std::vector<Tensor2<Real>*> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const auto* p : params_) {
        m_.emplace_back(p->rows(), p->cols());
        v_.emplace_back(p->rows(), p->cols());
    }
}

template <typename Real>
void Adam<Real>::step() {
    for (std::size_t k = 0; k < params_.size(); ++k)
        if (!params_[k]->has_grad())
            throw ContractError("adam_step: parameter " + std::to_string(k) + " (" + params_[k]->shape_str() +
                                ") has no gradient");
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, double(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, double(t_));
    const Real b1 = Real(cfg_.beta1);
    const Real b2 = Real(cfg_.beta2);
    for (std::size_t k = 0; k < params_.size(); ++k) {
        auto& p = *params_[k];
        auto w = p.data();
        auto m = m_[k].data();
        auto v = v_[k].data();
        for (std::size_t i = 0; i < w.size(); ++i) {
            const Real g = p.grad[i];
            m[i] = b1 * m[i] + (Real(1) - b1) * g;
            v[i] = b2 * v[i] + (Real(1) - b2) * g * g;
            const double m_hat = double(m[i]) / bc1;
            const double v_hat = double(v[i]) / bc2;
            w[i] -= Real(cfg_.lr * m_hat / (std::sqrt(v_hat) + cfg_.eps));
        }
        p.grad.clear();
    }
}

template <typename Real>
void Adam<Real>::restore(std::uint64_t t, std::vector<Tensor2<Real>> m, std::vector<Tensor2<Real>> v) {
    if (m.size() != params_.size() || v.size() != params_.size())
        throw DimensionError("adam restore: moment count does not match parameter count");
    for (std::size_t k = 0; k < params_.size(); ++k)
        if (!m[k].same_shape(*params_[k]) || !v[k].same_shape(*params_[k]))
            throw DimensionError("adam restore: moment shape mismatch for parameter " + std::to_string(k));
    t_ = t;
    m_ = std::move(m);
    v_ = std::move(v);
}

template class Adam<float>;
template class Adam<double>;

}  // namespace madt::nd
