#pragma once

#include <vector>

#include "madt/model/forward.hpp"
#include "madt/ndgrad/tape.hpp"

namespace madt::losses {

/// Floor applied inside every logarithm of a probability.
inline constexpr double kLogFloor = 1e-12;

/// Default weight of the alignment term in the total loss.
inline constexpr double kDefaultLambda = 19.0;

// ---- Differentiable forms ---------------------------------------------------

/// Row i: KL(p_i‖q_i) + KL(q_i‖p_i), as an m×1 column.
template <typename Real>
nd::Var<Real> sym_kl_rows(nd::Var<Real> p, nd::Var<Real> q);

/// Layer mean of sym_kl_rows(Seri^k, Temp^k); w×1. Requires the temporal branch.
template <typename Real>
nd::Var<Real> align_seri_temp(const std::vector<model::LayerMaps<Real>>& maps);

/// Symmetric KL between the row-pooled distributions of an m×m and an r×r
/// map after both are resampled to min(m, r) bins by contiguous mass
/// aggregation. 1×1.
template <typename Real>
nd::Var<Real> cross_dim_kl(nd::Var<Real> a, nd::Var<Real> b);

/// Each row of `a` resampled to min(m, r) bins, compared against b's pooled
/// resampled distribution. m×1.
template <typename Real>
nd::Var<Real> cross_dim_kl_rowwise(nd::Var<Real> a, nd::Var<Real> b);

/// Layer mean of cross_dim_kl_rowwise(Space^k, Seri^k); n×1.
template <typename Real>
nd::Var<Real> align_space_seri_rowwise(const std::vector<model::LayerMaps<Real>>& maps);

template <typename Real>
struct LossTerms {
    nd::Var<Real> recon_x, recon_t, recon_s;        // 1×1, invalid if branch disabled
    nd::Var<Real> align_st, align_ssp, align_tsp;   // 1×1, invalid if branch disabled
    nd::Var<Real> align_total;
    nd::Var<Real> recon_total;
    nd::Var<Real> total;
};

/// Reconstruction + lambda · alignment for one window.
template <typename Real>
LossTerms<Real> total_loss(const model::ForwardGraph<Real>& g, nd::Var<Real> x, nd::Var<Real> t, nd::Var<Real> s,
                           double lambda);

// ---- Plain 64-bit forms --------------------------------------------------------

/// Contiguous-bin mass aggregation matrix, m×L: entry (i, j) is the share of
/// source cell i that falls in target bin j. Rows sum to 1.
nd::Matrix resample_matrix(std::size_t m, std::size_t bins);

std::vector<double> sym_kl_rows(const nd::Matrix& p, const nd::Matrix& q);
std::vector<double> align_seri_temp(const model::AssociationMaps& maps);
double cross_dim_kl(const nd::Matrix& a, const nd::Matrix& b);
std::vector<double> cross_dim_kl_rowwise(const nd::Matrix& a, const nd::Matrix& b);
std::vector<double> align_space_seri_rowwise(const model::AssociationMaps& maps);

struct ReconTerms {
    double x = 0, t = 0, s = 0;
};
ReconTerms reconstruction_loss(const model::ForwardOutput& out, const nd::Matrix& x, const nd::Matrix& t,
                               const nd::Matrix& s);

struct LossBreakdown {
    double recon_x = 0, recon_t = 0, recon_s = 0;
    double align_st = 0, align_ssp = 0, align_tsp = 0;
    double total = 0;
    std::vector<double> align_seri_temp_pointwise;  // length w
    std::vector<double> align_seri_space_rowwise;   // length n

    double recon() const { return recon_x + recon_t + recon_s; }
    double align_total() const { return align_st + align_ssp + align_tsp; }
};

/// Composes the total from its parts: recon + lambda · align.
double total_loss(const LossBreakdown& parts, double lambda);

LossBreakdown evaluate_losses(const model::ForwardOutput& out, const nd::Matrix& x, const nd::Matrix& t,
                              const nd::Matrix& s, double lambda);

}  // namespace madt::losses
