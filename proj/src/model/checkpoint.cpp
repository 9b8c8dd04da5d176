#include "madt/model/checkpoint.hpp"

#include "madt/errors.hpp"

namespace madt::model {

template <typename Real>
void store_state(Container& c, const ModelState<Real>& state) {
    for (const auto& [k, v] : state.config.to_map()) c.meta["model." + k] = v;
    c.meta["model.precision"] = sizeof(Real) == 4 ? "f32" : "f64";
    for (const auto& [name, p] : state.parameters(true)) {
        nd::Tensor2<Real> copy(p->rows(), p->cols(), p->storage());
        c.put("param." + name, std::move(copy));
    }
}

template <typename Real>
ModelState<Real> load_state(const Container& c) {
    std::map<std::string, std::string> kv;
    for (const auto& [k, v] : c.meta)
        if (k.rfind("model.", 0) == 0) kv[k.substr(6)] = v;
    if (kv.empty()) throw InputError("checkpoint has no model configuration");
    kv.erase("precision");
    const ModelConfig cfg = ModelConfig::from_map(kv);
    auto state = ModelState<Real>::initialize(cfg, 0);
    for (auto& [name, p] : state.parameters(true)) {
        auto t = c.get<Real>("param." + name);
        if (!t.same_shape(*p))
            throw DimensionError("checkpoint tensor " + name + " is " + t.shape_str() + ", expected " + p->shape_str());
        *p = std::move(t);
        p->requires_grad = true;
    }
    return state;
}

template void store_state(Container&, const ModelState<float>&);
template void store_state(Container&, const ModelState<double>&);
template ModelState<float> load_state(const Container&);
template ModelState<double> load_state(const Container&);

}  // namespace madt::model
