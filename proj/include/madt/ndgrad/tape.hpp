#pragma once

#include <cstddef>
#include <deque>
#include <cstdint>
#include <functional>
#include <vector>

#include "madt/ndgrad/tensor.hpp"

namespace madt::nd {

template <typename Real>
class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; only valid while the
/// owning tape is alive.
template <typename Real>
struct Var {
    Tape<Real>* tape = nullptr;
    std::uint32_t id = 0;

    const Tensor2<Real>& value() const;
    std::size_t rows() const { return value().rows(); }
    std::size_t cols() const { return value().cols(); }
    bool valid() const noexcept { return tape != nullptr; }
};

/// Records operations of one forward pass. `backward` walks the record in
/// reverse and accumulates into every watched parameter's `grad`.
template <typename Real>
class Tape {
public:
    // Receives the tape, the op's own output handle and its output gradient.
    using BackwardFn = std::function<void(Tape&, Var<Real> self, const std::vector<Real>& out_grad)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Leaf that never receives a gradient.
    Var<Real> constant(Tensor2<Real> value);
    /// Leaf bound to an external tensor; when the tensor has requires_grad
    /// set, backward accumulates into its grad buffer. The tensor must outlive
    /// the tape.
    Var<Real> watch(Tensor2<Real>& param);
    /// Read-only leaf bound to an external tensor; never receives a gradient.
    Var<Real> watch(const Tensor2<Real>& value);
    Var<Real> watch(Tensor2<Real>&&) = delete;

    /// Records an op result. `backward` is invoked only if some input needs a
    /// gradient.
    Var<Real> record(Tensor2<Real> value, bool needs_grad, BackwardFn backward);

    const Tensor2<Real>& value(Var<Real> v) const;
    bool needs_grad(Var<Real> v) const { return nodes_[v.id].needs_grad; }

    /// Adds `g` into the gradient slot of `v` (no-op if `v` needs none).
    void accumulate(Var<Real> v, const std::vector<Real>& g);
    /// Mutable gradient slot of `v`, zero-initialised on first access.
    std::vector<Real>& grad_slot(Var<Real> v);

    void backward(Var<Real> loss);

    std::size_t size() const noexcept { return nodes_.size(); }

private:
    struct Node {
        Tensor2<Real> owned;
        const Tensor2<Real>* view = nullptr;
        Tensor2<Real>* external = nullptr;
        bool needs_grad = false;
        std::vector<Real> grad;
        BackwardFn backward;
    };
    std::deque<Node> nodes_;  // deque: value() references survive later records
};

template <typename Real>
const Tensor2<Real>& Var<Real>::value() const {
    return tape->value(*this);
}

extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace madt::nd
