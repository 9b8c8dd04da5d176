#pragma once

#include <cstddef>
#include <vector>

#include "madt/ndgrad/tape.hpp"

// Differentiable operations on tape variables. Each op validates shapes,
// computes its value eagerly and records the matching backward rule.
namespace madt::nd {

enum class Elementwise { add, sub, mul };

template <typename Real> Var<Real> matmul(Var<Real> a, Var<Real> b);
/// a · bᵀ without materialising the transpose.
template <typename Real> Var<Real> matmul_nt(Var<Real> a, Var<Real> b);
template <typename Real> Var<Real> elementwise(Var<Real> a, Var<Real> b, Elementwise kind);
template <typename Real> Var<Real> add(Var<Real> a, Var<Real> b) { return elementwise(a, b, Elementwise::add); }
template <typename Real> Var<Real> sub(Var<Real> a, Var<Real> b) { return elementwise(a, b, Elementwise::sub); }
template <typename Real> Var<Real> mul(Var<Real> a, Var<Real> b) { return elementwise(a, b, Elementwise::mul); }
/// Adds a 1×cols row vector to every row of `a`.
template <typename Real> Var<Real> add_row(Var<Real> a, Var<Real> row);
template <typename Real> Var<Real> scale(Var<Real> a, Real c);
template <typename Real> Var<Real> transpose(Var<Real> a);

/// Σ a², as a 1×1 tensor.
template <typename Real> Var<Real> frobenius_sq(Var<Real> a);
template <typename Real> Var<Real> sum(Var<Real> a);
/// m×1 column of per-row sums.
template <typename Real> Var<Real> row_sum(Var<Real> a);

template <typename Real> Var<Real> concat_cols(const std::vector<Var<Real>>& parts);
template <typename Real> Var<Real> slice_cols(Var<Real> a, std::size_t begin, std::size_t count);
/// Splits columns into `parts` equal blocks; cols must be divisible by parts.
template <typename Real> std::vector<Var<Real>> split_cols(Var<Real> a, std::size_t parts);

template <typename Real> Var<Real> relu(Var<Real> a);
/// Exact (erf) GELU.
template <typename Real> Var<Real> gelu(Var<Real> a);
/// Natural log; throws NumericError on any nonpositive entry.
template <typename Real> Var<Real> log(Var<Real> a);
/// log(max(a, floor)); the gradient is zero where the floor is active.
template <typename Real> Var<Real> log_floor(Var<Real> a, Real floor);

/// Row-wise softmax with max subtraction. Throws NumericError on non-finite input.
template <typename Real> Var<Real> softmax_rows(Var<Real> a);
/// Per-row standardisation (biased variance, √(var+eps)) followed by
/// gain/bias, both 1×cols.
template <typename Real> Var<Real> layer_norm(Var<Real> a, Var<Real> gain, Var<Real> bias, Real eps);

}  // namespace madt::nd
