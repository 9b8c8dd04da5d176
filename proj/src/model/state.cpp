#include "madt/model/state.hpp"

#include <cmath>
#include <random>

namespace madt::model {

const char* branch_name(Branch b) {
    switch (b) {
        case Branch::series: return "series";
        case Branch::temporal: return "temporal";
        case Branch::spatial: return "spatial";
    }
    return "?";
}

namespace {

template <typename Real>
class Initializer {
public:
    explicit Initializer(std::uint64_t seed) : rng_(seed) {}

    nd::Tensor2<Real> uniform(std::size_t rows, std::size_t cols, std::size_t fan_in) {
        nd::Tensor2<Real> t(rows, cols);
        const double bound = 1.0 / std::sqrt(double(fan_in));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (auto& x : t.data()) x = Real(dist(rng_));
        t.requires_grad = true;
        return t;
    }

    Linear<Real> linear(std::size_t in, std::size_t out) {
        Linear<Real> l;
        l.weight = uniform(in, out, in);
        l.bias = uniform(1, out, in);
        return l;
    }

    NormParams<Real> norm(std::size_t width) {
        NormParams<Real> p{nd::Tensor2<Real>(1, width, Real(1)), nd::Tensor2<Real>(1, width, Real(0))};
        p.gain.requires_grad = true;
        p.bias.requires_grad = true;
        return p;
    }

private:
    std::mt19937_64 rng_;
};

template <typename Out, typename Lin>
void push_linear(Out& out, const std::string& name, Lin& l) {
    out.emplace_back(name + ".weight", &l.weight);
    out.emplace_back(name + ".bias", &l.bias);
}

// Shared walk for the const and mutable parameter listings.
template <typename Out, typename State>
Out collect_parameters(State& s, bool include_disabled) {
    Out out;
    for (std::size_t b = 0; b < 3; ++b) {
        const auto br = static_cast<Branch>(b);
        if (!include_disabled && !s.branch_enabled(br)) continue;
        const std::string bn = branch_name(br);
        for (std::size_t k = 0; k < 3; ++k)
            push_linear(out, "encoder." + bn + "." + std::to_string(k), s.encoders[b].stages[k]);
        for (std::size_t l = 0; l < s.layers.size(); ++l) {
            auto& bl = s.layers[l].branch[b];
            const std::string p = "layer" + std::to_string(l) + "." + bn + ".";
            out.emplace_back(p + "wq", &bl.attn.wq);
            out.emplace_back(p + "wk", &bl.attn.wk);
            out.emplace_back(p + "wv", &bl.attn.wv);
            push_linear(out, p + "attn_out", bl.attn.out);
            out.emplace_back(p + "norm1.gain", &bl.norm1.gain);
            out.emplace_back(p + "norm1.bias", &bl.norm1.bias);
            push_linear(out, p + "ff_up", bl.ff_up);
            push_linear(out, p + "ff_down", bl.ff_down);
            out.emplace_back(p + "norm2.gain", &bl.norm2.gain);
            out.emplace_back(p + "norm2.bias", &bl.norm2.bias);
        }
        push_linear(out, "head." + bn, s.heads[b]);
    }
    return out;
}

}  // namespace

template <typename Real>
ModelState<Real> ModelState<Real>::initialize(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Initializer<Real> init(seed);
    ModelState s;
    s.config = cfg;
    const std::size_t d = cfg.d_model;
    const std::array<std::size_t, 3> in_width{cfg.sensors, cfg.window, cfg.sensors};
    const std::array<std::size_t, 3> out_width{cfg.sensors, cfg.window, cfg.sensors};

    for (std::size_t b = 0; b < 3; ++b) {
        s.encoders[b].stages[0] = init.linear(in_width[b], d);
        s.encoders[b].stages[1] = init.linear(d, d);
        s.encoders[b].stages[2] = init.linear(d, d);
    }
    s.layers.resize(cfg.layers);
    for (auto& layer : s.layers) {
        for (auto& bl : layer.branch) {
            bl.attn.wq = init.uniform(d, d, d);
            bl.attn.wk = init.uniform(d, d, d);
            bl.attn.wv = init.uniform(d, d, d);
            bl.attn.out = init.linear(d, d);
            bl.norm1 = init.norm(d);
            bl.ff_up = init.linear(d, cfg.ff_width());
            bl.ff_down = init.linear(cfg.ff_width(), d);
            bl.norm2 = init.norm(d);
        }
    }
    for (std::size_t b = 0; b < 3; ++b) s.heads[b] = init.linear(d, out_width[b]);
    return s;
}

template <typename Real>
bool ModelState<Real>::branch_enabled(Branch b) const {
    switch (b) {
        case Branch::series: return true;
        case Branch::temporal: return config.temporal_branch;
        case Branch::spatial: return config.spatial_branch;
    }
    return false;
}

template <typename Real>
NamedTensors<Real> ModelState<Real>::parameters(bool include_disabled) {
    return collect_parameters<NamedTensors<Real>>(*this, include_disabled);
}

template <typename Real>
ConstNamedTensors<Real> ModelState<Real>::parameters(bool include_disabled) const {
    return collect_parameters<ConstNamedTensors<Real>>(*this, include_disabled);
}

template <typename Real>
std::vector<nd::Tensor2<Real>*> ModelState<Real>::parameter_ptrs() {
    std::vector<nd::Tensor2<Real>*> out;
    for (auto& [name, p] : parameters()) out.push_back(p);
    return out;
}

template <typename Real>
void ModelState<Real>::zero_grad() {
    for (auto& [name, p] : parameters(true)) p->grad.clear();
}

template struct ModelState<float>;
template struct ModelState<double>;

template <typename To, typename From>
ModelState<To> convert_state(const ModelState<From>& src) {
    ModelState<To> dst = ModelState<To>::initialize(src.config, 0);
    auto from = src.parameters(true);
    auto to = dst.parameters(true);
    for (std::size_t i = 0; i < from.size(); ++i) {
        *to[i].second = from[i].second->template cast<To>();
        to[i].second->requires_grad = true;
    }
    return dst;
}

template ModelState<float> convert_state<float, double>(const ModelState<double>&);
template ModelState<double> convert_state<double, float>(const ModelState<float>&);
template ModelState<float> convert_state<float, float>(const ModelState<float>&);
template ModelState<double> convert_state<double, double>(const ModelState<double>&);

}  // namespace madt::model
