#include "madt/model/forward.hpp"

#include <cmath>

#include "madt/ndgrad/ops.hpp"

namespace madt::model {
namespace {

using nd::Var;

template <typename Real, typename Lin>
Var<Real> affine(nd::Tape<Real>& tape, Var<Real> in, Lin& lin) {
    return nd::add_row(nd::matmul(in, tape.watch(lin.weight)), tape.watch(lin.bias));
}

template <typename Real, typename Enc>
Var<Real> encode(nd::Tape<Real>& tape, Var<Real> in, Enc& enc) {
    auto h = nd::gelu(affine(tape, in, enc.stages[0]));
    h = nd::gelu(affine(tape, h, enc.stages[1]));
    return affine(tape, h, enc.stages[2]);
}

// One branch of the attention block: project to Q/K/V, attend per head,
// concatenate, project out. Writes the head-averaged map to `map_out`.
template <typename Real, typename Attn>
Var<Real> attend(nd::Tape<Real>& tape, Var<Real> in, Attn& p, std::size_t heads, Var<Real>& map_out) {
    const auto q = nd::split_cols(nd::matmul(in, tape.watch(p.wq)), heads);
    const auto k = nd::split_cols(nd::matmul(in, tape.watch(p.wk)), heads);
    const auto v = nd::split_cols(nd::matmul(in, tape.watch(p.wv)), heads);
    const Real scale = Real(1) / std::sqrt(Real(q.front().cols()));

    std::vector<Var<Real>> outs;
    outs.reserve(heads);
    Var<Real> map_sum;
    for (std::size_t l = 0; l < heads; ++l) {
        const auto map = nd::softmax_rows(nd::scale(nd::matmul_nt(q[l], k[l]), scale));
        outs.push_back(nd::matmul(map, v[l]));
        map_sum = l == 0 ? map : nd::add(map_sum, map);
    }
    map_out = heads == 1 ? map_sum : nd::scale(map_sum, Real(1) / Real(heads));
    return affine(tape, nd::concat_cols(outs), p.out);
}

template <typename Real, typename LayerT>
AttentionResult<Real> mad_attention_impl(nd::Tape<Real>& tape, LayerT& layer, const Streams<Real>& in,
                                         const ModelConfig& cfg) {
    AttentionResult<Real> r;
    r.streams.series = attend(tape, in.series, layer.branch[0].attn, cfg.heads, r.maps.seri);
    if (in.temporal.valid())
        r.streams.temporal = attend(tape, in.temporal, layer.branch[1].attn, cfg.heads, r.maps.temp);
    if (in.spatial.valid())
        r.streams.spatial = attend(tape, in.spatial, layer.branch[2].attn, cfg.heads, r.maps.space);
    return r;
}

template <typename Real, typename BranchT>
Var<Real> post_attention(nd::Tape<Real>& tape, Var<Real> input, Var<Real> attn_out, BranchT& bl, Real eps) {
    auto h = nd::layer_norm(nd::add(attn_out, input), tape.watch(bl.norm1.gain), tape.watch(bl.norm1.bias), eps);
    auto ff = affine(tape, nd::gelu(affine(tape, h, bl.ff_up)), bl.ff_down);
    return nd::layer_norm(nd::add(ff, h), tape.watch(bl.norm2.gain), tape.watch(bl.norm2.bias), eps);
}

template <typename Real, typename LayerT>
AttentionResult<Real> layer_forward_impl(nd::Tape<Real>& tape, LayerT& layer, const Streams<Real>& in,
                                         const ModelConfig& cfg) {
    auto r = mad_attention_impl(tape, layer, in, cfg);
    const Real eps = Real(cfg.ln_eps);
    r.streams.series = post_attention(tape, in.series, r.streams.series, layer.branch[0], eps);
    if (in.temporal.valid())
        r.streams.temporal = post_attention(tape, in.temporal, r.streams.temporal, layer.branch[1], eps);
    if (in.spatial.valid())
        r.streams.spatial = post_attention(tape, in.spatial, r.streams.spatial, layer.branch[2], eps);
    return r;
}

template <typename Real, typename State>
Streams<Real> embed_impl(nd::Tape<Real>& tape, State& state, Var<Real> x, Var<Real> t, Var<Real> s) {
    const auto& cfg = state.config;
    if (x.rows() != cfg.window || x.cols() != cfg.sensors)
        throw DimensionError("embed: series input is " + x.value().shape_str() + ", expected " +
                             std::to_string(cfg.window) + "x" + std::to_string(cfg.sensors));
    Streams<Real> out;
    out.series = encode(tape, x, state.encoders[0]);
    if (cfg.temporal_branch) {
        if (t.rows() != cfg.window || t.cols() != cfg.window)
            throw DimensionError("embed: temporal matrix is " + t.value().shape_str() + ", expected " +
                                 std::to_string(cfg.window) + "x" + std::to_string(cfg.window));
        out.temporal = encode(tape, t, state.encoders[1]);
    }
    if (cfg.spatial_branch) {
        if (s.rows() != cfg.sensors || s.cols() != cfg.sensors)
            throw DimensionError("embed: spatial matrix is " + s.value().shape_str() + ", expected " +
                                 std::to_string(cfg.sensors) + "x" + std::to_string(cfg.sensors));
        out.spatial = encode(tape, s, state.encoders[2]);
    }
    return out;
}

template <typename Real, typename State>
ForwardGraph<Real> forward_impl(nd::Tape<Real>& tape, State& state, const nd::Tensor2<Real>& x,
                                const nd::Tensor2<Real>& t, const nd::Tensor2<Real>& s) {
    const auto& cfg = state.config;
    auto streams = embed_impl(tape, state, tape.watch(x), tape.watch(t), tape.watch(s));
    ForwardGraph<Real> g;
    for (auto& layer : state.layers) {
        auto r = layer_forward_impl(tape, layer, streams, cfg);
        streams = r.streams;
        g.maps.push_back(r.maps);
    }
    g.x_rec = affine(tape, streams.series, state.heads[0]);
    if (streams.temporal.valid()) g.t_rec = affine(tape, streams.temporal, state.heads[1]);
    if (streams.spatial.valid()) g.s_rec = affine(tape, streams.spatial, state.heads[2]);
    return g;
}

template <typename Real>
nd::Matrix to_double(Var<Real> v) {
    return v.valid() ? v.value().template cast<double>() : nd::Matrix{};
}

}  // namespace

template <typename Real>
Streams<Real> embed(nd::Tape<Real>& tape, ModelState<Real>& state, Var<Real> x, Var<Real> t, Var<Real> s) {
    return embed_impl(tape, state, x, t, s);
}
template <typename Real>
Streams<Real> embed(nd::Tape<Real>& tape, const ModelState<Real>& state, Var<Real> x, Var<Real> t, Var<Real> s) {
    return embed_impl(tape, state, x, t, s);
}

template <typename Real>
AttentionResult<Real> mad_attention(nd::Tape<Real>& tape, Layer<Real>& layer, const Streams<Real>& in,
                                    const ModelConfig& cfg) {
    return mad_attention_impl(tape, layer, in, cfg);
}
template <typename Real>
AttentionResult<Real> mad_attention(nd::Tape<Real>& tape, const Layer<Real>& layer, const Streams<Real>& in,
                                    const ModelConfig& cfg) {
    return mad_attention_impl(tape, layer, in, cfg);
}

template <typename Real>
AttentionResult<Real> layer_forward(nd::Tape<Real>& tape, Layer<Real>& layer, const Streams<Real>& in,
                                    const ModelConfig& cfg) {
    return layer_forward_impl(tape, layer, in, cfg);
}
template <typename Real>
AttentionResult<Real> layer_forward(nd::Tape<Real>& tape, const Layer<Real>& layer, const Streams<Real>& in,
                                    const ModelConfig& cfg) {
    return layer_forward_impl(tape, layer, in, cfg);
}

template <typename Real>
ForwardGraph<Real> forward(nd::Tape<Real>& tape, ModelState<Real>& state, const nd::Tensor2<Real>& x,
                           const nd::Tensor2<Real>& t, const nd::Tensor2<Real>& s) {
    return forward_impl(tape, state, x, t, s);
}
template <typename Real>
ForwardGraph<Real> forward(nd::Tape<Real>& tape, const ModelState<Real>& state, const nd::Tensor2<Real>& x,
                           const nd::Tensor2<Real>& t, const nd::Tensor2<Real>& s) {
    return forward_impl(tape, state, x, t, s);
}

template <typename Real>
ForwardOutput collect_output(const ForwardGraph<Real>& g) {
    ForwardOutput out;
    out.x_rec = to_double(g.x_rec);
    out.t_rec = to_double(g.t_rec);
    out.s_rec = to_double(g.s_rec);
    for (const auto& m : g.maps) {
        out.maps.seri.push_back(to_double(m.seri));
        if (m.temp.valid()) out.maps.temp.push_back(to_double(m.temp));
        if (m.space.valid()) out.maps.space.push_back(to_double(m.space));
    }
    return out;
}

template <typename Real>
ForwardOutput forward_values(const ModelState<Real>& state, const statemat::TimeWindow& win,
                             const statemat::StateMatrixPair& pair) {
    nd::Tape<Real> tape;
    const auto x = win.values.template cast<Real>();
    const auto t = pair.temporal.template cast<Real>();
    const auto s = pair.spatial.template cast<Real>();
    return collect_output(forward(tape, state, x, t, s));
}

#define MADT_INSTANTIATE_FORWARD(R)                                                                          \
    template Streams<R> embed(nd::Tape<R>&, ModelState<R>&, Var<R>, Var<R>, Var<R>);                         \
    template Streams<R> embed(nd::Tape<R>&, const ModelState<R>&, Var<R>, Var<R>, Var<R>);                   \
    template AttentionResult<R> mad_attention(nd::Tape<R>&, Layer<R>&, const Streams<R>&, const ModelConfig&); \
    template AttentionResult<R> mad_attention(nd::Tape<R>&, const Layer<R>&, const Streams<R>&,              \
                                              const ModelConfig&);                                           \
    template AttentionResult<R> layer_forward(nd::Tape<R>&, Layer<R>&, const Streams<R>&, const ModelConfig&); \
    template AttentionResult<R> layer_forward(nd::Tape<R>&, const Layer<R>&, const Streams<R>&,              \
                                              const ModelConfig&);                                           \
    template ForwardGraph<R> forward(nd::Tape<R>&, ModelState<R>&, const nd::Tensor2<R>&,                    \
                                     const nd::Tensor2<R>&, const nd::Tensor2<R>&);                          \
    template ForwardGraph<R> forward(nd::Tape<R>&, const ModelState<R>&, const nd::Tensor2<R>&,              \
                                     const nd::Tensor2<R>&, const nd::Tensor2<R>&);                          \
    template ForwardOutput collect_output(const ForwardGraph<R>&);                                           \
    template ForwardOutput forward_values(const ModelState<R>&, const statemat::TimeWindow&,                 \
                                          const statemat::StateMatrixPair&);

MADT_INSTANTIATE_FORWARD(float)
MADT_INSTANTIATE_FORWARD(double)

}  // namespace madt::model
