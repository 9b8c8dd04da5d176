#include "madt/ndgrad/tape.hpp"

#include <string>

namespace madt::nd {

template <typename Real>
Var<Real> Tape<Real>::constant(Tensor2<Real> value) {
    Node n;
    n.owned = std::move(value);
    nodes_.push_back(std::move(n));
    return {this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

template <typename Real>
Var<Real> Tape<Real>::watch(Tensor2<Real>& param) {
    Node n;
    n.view = &param;
    n.external = &param;
    n.needs_grad = param.requires_grad;
    nodes_.push_back(std::move(n));
    return {this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

template <typename Real>
Var<Real> Tape<Real>::watch(const Tensor2<Real>& value) {
    Node n;
    n.view = &value;
    nodes_.push_back(std::move(n));
    return {this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

template <typename Real>
Var<Real> Tape<Real>::record(Tensor2<Real> value, bool needs_grad, BackwardFn backward) {
    Node n;
    n.owned = std::move(value);
    n.needs_grad = needs_grad;
    if (needs_grad) n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return {this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

template <typename Real>
const Tensor2<Real>& Tape<Real>::value(Var<Real> v) const {
    const Node& n = nodes_[v.id];
    return n.view ? *n.view : n.owned;
}

template <typename Real>
std::vector<Real>& Tape<Real>::grad_slot(Var<Real> v) {
    Node& n = nodes_[v.id];
    if (n.external) {
        if (!n.external->has_grad()) n.external->zero_grad();
        return n.external->grad;
    }
    if (n.grad.size() != n.owned.size()) n.grad.assign(n.owned.size(), Real(0));
    return n.grad;
}

template <typename Real>
void Tape<Real>::accumulate(Var<Real> v, const std::vector<Real>& g) {
    if (!nodes_[v.id].needs_grad) return;
    auto& slot = grad_slot(v);
    for (std::size_t i = 0; i < slot.size(); ++i) slot[i] += g[i];
}

template <typename Real>
void Tape<Real>::backward(Var<Real> loss) {
    if (loss.tape != this) throw ContractError("backward: loss is not recorded on this tape");
    const auto& lv = value(loss);
    if (lv.rows() != 1 || lv.cols() != 1)
        throw ContractError("backward: loss must be 1x1, got " + lv.shape_str());

    for (auto& n : nodes_) {
        if (n.external) {
            if (n.needs_grad && !n.external->has_grad()) n.external->zero_grad();
        } else {
            n.grad.clear();
        }
    }
    if (!nodes_[loss.id].needs_grad) return;
    accumulate(loss, std::vector<Real>{Real(1)});

    for (std::size_t i = nodes_.size(); i-- > 0;) {
        Node& n = nodes_[i];
        if (n.view || !n.needs_grad || !n.backward || n.grad.empty()) continue;
        // The callback may touch other nodes' slots but never this one.
        const std::vector<Real> g = std::move(n.grad);
        n.grad.clear();
        n.backward(*this, Var<Real>{this, static_cast<std::uint32_t>(i)}, g);
    }
}

template class Tape<float>;
template class Tape<double>;

}  // namespace madt::nd
