#pragma once

#include <vector>

#include "madt/model/state.hpp"
#include "madt/ndgrad/tape.hpp"
#include "madt/statemat/state_matrix.hpp"

namespace madt::model {

/// Hidden representations of the three streams. Streams of disabled
/// branches are left invalid.
template <typename Real>
struct Streams {
    nd::Var<Real> series;    // w×d
    nd::Var<Real> temporal;  // w×d
    nd::Var<Real> spatial;   // n×d
};

/// Head-averaged association maps of one layer.
template <typename Real>
struct LayerMaps {
    nd::Var<Real> seri;   // w×w
    nd::Var<Real> temp;   // w×w
    nd::Var<Real> space;  // n×n
};

template <typename Real>
struct AttentionResult {
    Streams<Real> streams;
    LayerMaps<Real> maps;
};

template <typename Real>
struct ForwardGraph {
    nd::Var<Real> x_rec;  // w×n
    nd::Var<Real> t_rec;  // w×w
    nd::Var<Real> s_rec;  // n×n
    std::vector<LayerMaps<Real>> maps;
};

/// Plain association maps, one entry per layer. Empty vectors for disabled
/// branches.
struct AssociationMaps {
    std::vector<nd::Matrix> seri;
    std::vector<nd::Matrix> temp;
    std::vector<nd::Matrix> space;

    std::size_t layers() const noexcept { return seri.size(); }
};

struct ForwardOutput {
    nd::Matrix x_rec;
    nd::Matrix t_rec;
    nd::Matrix s_rec;
    AssociationMaps maps;
};

// Mutable-state overloads bind parameters for gradient accumulation; const
// overloads bind them read-only.

template <typename Real>
Streams<Real> embed(nd::Tape<Real>& tape, ModelState<Real>& state, nd::Var<Real> x, nd::Var<Real> t, nd::Var<Real> s);
template <typename Real>
Streams<Real> embed(nd::Tape<Real>& tape, const ModelState<Real>& state, nd::Var<Real> x, nd::Var<Real> t,
                    nd::Var<Real> s);

/// Three-branch multi-head attention of one layer; no residual or norm.
template <typename Real>
AttentionResult<Real> mad_attention(nd::Tape<Real>& tape, Layer<Real>& layer, const Streams<Real>& in,
                                    const ModelConfig& cfg);
template <typename Real>
AttentionResult<Real> mad_attention(nd::Tape<Real>& tape, const Layer<Real>& layer, const Streams<Real>& in,
                                    const ModelConfig& cfg);

/// Attention, residual add, norm, MLP, residual add, norm.
template <typename Real>
AttentionResult<Real> layer_forward(nd::Tape<Real>& tape, Layer<Real>& layer, const Streams<Real>& in,
                                    const ModelConfig& cfg);
template <typename Real>
AttentionResult<Real> layer_forward(nd::Tape<Real>& tape, const Layer<Real>& layer, const Streams<Real>& in,
                                    const ModelConfig& cfg);

template <typename Real>
ForwardGraph<Real> forward(nd::Tape<Real>& tape, ModelState<Real>& state, const nd::Tensor2<Real>& x,
                           const nd::Tensor2<Real>& t, const nd::Tensor2<Real>& s);
template <typename Real>
ForwardGraph<Real> forward(nd::Tape<Real>& tape, const ModelState<Real>& state, const nd::Tensor2<Real>& x,
                           const nd::Tensor2<Real>& t, const nd::Tensor2<Real>& s);

/// Inference: runs the model on one window and returns plain 64-bit values.
template <typename Real>
ForwardOutput forward_values(const ModelState<Real>& state, const statemat::TimeWindow& win,
                             const statemat::StateMatrixPair& pair);

/// Copies tape values of a graph into plain 64-bit matrices.
template <typename Real>
ForwardOutput collect_output(const ForwardGraph<Real>& graph);

}  // namespace madt::model
