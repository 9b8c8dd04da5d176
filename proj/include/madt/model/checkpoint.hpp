#pragma once

#include "madt/model/container.hpp"
#include "madt/model/state.hpp"

namespace madt::model {

/// Writes the config under "model.*" metadata and every parameter (including
/// disabled branches) as "param.<name>" tensors in the state's precision.
template <typename Real>
void store_state(Container& c, const ModelState<Real>& state);

/// Rebuilds a state from `store_state` output, converting precision if needed.
template <typename Real>
ModelState<Real> load_state(const Container& c);

}  // namespace madt::model
