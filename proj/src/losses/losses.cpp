#include "madt/losses/losses.hpp"

#include <algorithm>
#include <cmath>

#include "madt/ndgrad/ops.hpp"

namespace madt::losses {
namespace {

using nd::Var;

template <typename Real>
Var<Real> pooled_rows(Var<Real> a) {
    const std::size_t m = a.rows();
    return nd::matmul(a.tape->constant(nd::Tensor2<Real>(1, m, Real(1) / Real(m))), a);
}

template <typename Real>
Var<Real> resample(Var<Real> a, std::size_t bins) {
    if (a.cols() == bins) return a;
    return nd::matmul(a, a.tape->constant(resample_matrix(a.cols(), bins).template cast<Real>()));
}

void require_square_at_least_2(const char* what, std::size_t rows, std::size_t cols) {
    if (rows != cols) throw DimensionError(std::string(what) + ": association map must be square");
    if (rows < 2) throw ParameterError(std::string(what) + ": association map dimension must be >= 2");
}

template <typename Real>
Var<Real> layer_mean(const std::vector<Var<Real>>& terms) {
    Var<Real> acc = terms.front();
    for (std::size_t k = 1; k < terms.size(); ++k) acc = nd::add(acc, terms[k]);
    return terms.size() == 1 ? acc : nd::scale(acc, Real(1) / Real(terms.size()));
}

template <typename Real>
std::vector<model::LayerMaps<Real>> maps_on_tape(nd::Tape<Real>& tape, const model::AssociationMaps& maps) {
    std::vector<model::LayerMaps<Real>> out(maps.layers());
    for (std::size_t k = 0; k < maps.layers(); ++k) {
        out[k].seri = tape.watch(maps.seri[k]);
        if (k < maps.temp.size()) out[k].temp = tape.watch(maps.temp[k]);
        if (k < maps.space.size()) out[k].space = tape.watch(maps.space[k]);
    }
    return out;
}

std::vector<double> column(const nd::Matrix& m) {
    return {m.data().begin(), m.data().end()};
}

}  // namespace

nd::Matrix resample_matrix(std::size_t m, std::size_t bins) {
    if (m == 0 || bins == 0) throw ParameterError("resample_matrix: sizes must be positive");
    nd::Matrix a(m, bins);
    // Work in units of 1/(m·bins) so boundaries are integers.
    for (std::size_t i = 0; i < m; ++i) {
        const std::size_t lo = i * bins, hi = (i + 1) * bins;
        for (std::size_t j = lo / m; j < bins && j * m < hi; ++j) {
            const std::size_t blo = j * m, bhi = (j + 1) * m;
            const std::size_t overlap = std::min(hi, bhi) - std::max(lo, blo);
            if (std::max(lo, blo) < std::min(hi, bhi)) a(i, j) = double(overlap) / double(bins);
        }
    }
    return a;
}

template <typename Real>
Var<Real> sym_kl_rows(Var<Real> p, Var<Real> q) {
    if (!p.value().same_shape(q.value()))
        throw DimensionError("sym_kl_rows: shape mismatch " + p.value().shape_str() + " vs " + q.value().shape_str());
    const Real floor = Real(kLogFloor);
    const auto diff = nd::sub(p, q);
    const auto log_ratio = nd::sub(nd::log_floor(p, floor), nd::log_floor(q, floor));
    return nd::row_sum(nd::mul(diff, log_ratio));
}

template <typename Real>
Var<Real> align_seri_temp(const std::vector<model::LayerMaps<Real>>& maps) {
    if (maps.empty()) throw ParameterError("align_seri_temp: no layers");
    std::vector<Var<Real>> per_layer;
    for (const auto& m : maps) {
        if (!m.temp.valid()) throw ContractError("align_seri_temp: temporal branch is disabled");
        per_layer.push_back(sym_kl_rows(m.seri, m.temp));
    }
    return layer_mean(per_layer);
}

template <typename Real>
Var<Real> cross_dim_kl(Var<Real> a, Var<Real> b) {
    require_square_at_least_2("cross_dim_kl", a.rows(), a.cols());
    require_square_at_least_2("cross_dim_kl", b.rows(), b.cols());
    const std::size_t bins = std::min(a.rows(), b.rows());
    // Resampling preserves mass exactly (rows of the aggregation matrix sum
    // to one), so the pooled distributions need no renormalisation.
    return sym_kl_rows(resample(pooled_rows(a), bins), resample(pooled_rows(b), bins));
}

template <typename Real>
Var<Real> cross_dim_kl_rowwise(Var<Real> a, Var<Real> b) {
    require_square_at_least_2("cross_dim_kl_rowwise", a.rows(), a.cols());
    require_square_at_least_2("cross_dim_kl_rowwise", b.rows(), b.cols());
    const std::size_t bins = std::min(a.rows(), b.rows());
    const auto rows = resample(a, bins);
    const auto target = resample(pooled_rows(b), bins);
    const auto broadcast = nd::matmul(a.tape->constant(nd::Tensor2<Real>(a.rows(), 1, Real(1))), target);
    return sym_kl_rows(rows, broadcast);
}

template <typename Real>
Var<Real> align_space_seri_rowwise(const std::vector<model::LayerMaps<Real>>& maps) {
    if (maps.empty()) throw ParameterError("align_space_seri_rowwise: no layers");
    std::vector<Var<Real>> per_layer;
    for (const auto& m : maps) {
        if (!m.space.valid()) throw ContractError("align_space_seri_rowwise: spatial branch is disabled");
        per_layer.push_back(cross_dim_kl_rowwise(m.space, m.seri));
    }
    return layer_mean(per_layer);
}

template <typename Real>
LossTerms<Real> total_loss(const model::ForwardGraph<Real>& g, Var<Real> x, Var<Real> t, Var<Real> s, double lambda) {
    if (lambda < 0) throw ParameterError("total_loss: lambda must be >= 0");
    LossTerms<Real> lt;
    lt.recon_x = nd::frobenius_sq(nd::sub(x, g.x_rec));
    lt.recon_total = lt.recon_x;
    if (g.t_rec.valid()) {
        lt.recon_t = nd::frobenius_sq(nd::sub(t, g.t_rec));
        lt.recon_total = nd::add(lt.recon_total, lt.recon_t);
    }
    if (g.s_rec.valid()) {
        lt.recon_s = nd::frobenius_sq(nd::sub(s, g.s_rec));
        lt.recon_total = nd::add(lt.recon_total, lt.recon_s);
    }

    const bool has_temp = !g.maps.empty() && g.maps.front().temp.valid();
    const bool has_space = !g.maps.empty() && g.maps.front().space.valid();
    std::vector<Var<Real>> align_terms;
    if (has_temp) {
        // Every entry is a non-negative divergence, so the L1 norm is the sum.
        lt.align_st = nd::sum(align_seri_temp(g.maps));
        align_terms.push_back(lt.align_st);
    }
    if (has_space) {
        std::vector<Var<Real>> ssp, tsp;
        for (const auto& m : g.maps) {
            ssp.push_back(cross_dim_kl(m.seri, m.space));
            if (has_temp) tsp.push_back(cross_dim_kl(m.temp, m.space));
        }
        lt.align_ssp = layer_mean(ssp);
        align_terms.push_back(lt.align_ssp);
        if (has_temp) {
            lt.align_tsp = layer_mean(tsp);
            align_terms.push_back(lt.align_tsp);
        }
    }

    if (align_terms.empty()) {
        lt.align_total = x.tape->constant(nd::Tensor2<Real>(1, 1));
    } else {
        lt.align_total = align_terms.front();
        for (std::size_t i = 1; i < align_terms.size(); ++i) lt.align_total = nd::add(lt.align_total, align_terms[i]);
    }
    lt.total = lambda == 0 ? lt.recon_total : nd::add(lt.recon_total, nd::scale(lt.align_total, Real(lambda)));
    return lt;
}

std::vector<double> sym_kl_rows(const nd::Matrix& p, const nd::Matrix& q) {
    nd::Tape<double> tape;
    return column(sym_kl_rows(tape.watch(p), tape.watch(q)).value());
}

std::vector<double> align_seri_temp(const model::AssociationMaps& maps) {
    nd::Tape<double> tape;
    return column(align_seri_temp(maps_on_tape(tape, maps)).value());
}

double cross_dim_kl(const nd::Matrix& a, const nd::Matrix& b) {
    nd::Tape<double> tape;
    return cross_dim_kl(tape.watch(a), tape.watch(b)).value()(0, 0);
}

std::vector<double> cross_dim_kl_rowwise(const nd::Matrix& a, const nd::Matrix& b) {
    nd::Tape<double> tape;
    return column(cross_dim_kl_rowwise(tape.watch(a), tape.watch(b)).value());
}

std::vector<double> align_space_seri_rowwise(const model::AssociationMaps& maps) {
    nd::Tape<double> tape;
    return column(align_space_seri_rowwise(maps_on_tape(tape, maps)).value());
}

ReconTerms reconstruction_loss(const model::ForwardOutput& out, const nd::Matrix& x, const nd::Matrix& t,
                               const nd::Matrix& s) {
    auto sq = [](const char* what, const nd::Matrix& a, const nd::Matrix& b) {
        if (b.empty()) return 0.0;
        if (!a.same_shape(b))
            throw DimensionError(std::string("reconstruction_loss: ") + what + " shape " + a.shape_str() + " vs " +
                                 b.shape_str());
        double acc = 0;
        for (std::size_t i = 0; i < a.size(); ++i) acc += (a.data()[i] - b.data()[i]) * (a.data()[i] - b.data()[i]);
        return acc;
    };
    return {sq("x", x, out.x_rec), sq("T", t, out.t_rec), sq("S", s, out.s_rec)};
}

double total_loss(const LossBreakdown& parts, double lambda) {
    if (lambda < 0) throw ParameterError("total_loss: lambda must be >= 0");
    return parts.recon() + lambda * parts.align_total();
}

LossBreakdown evaluate_losses(const model::ForwardOutput& out, const nd::Matrix& x, const nd::Matrix& t,
                              const nd::Matrix& s, double lambda) {
    LossBreakdown lb;
    const auto r = reconstruction_loss(out, x, t, s);
    lb.recon_x = r.x;
    lb.recon_t = r.t;
    lb.recon_s = r.s;
    const bool has_temp = !out.maps.temp.empty();
    const bool has_space = !out.maps.space.empty();
    if (has_temp) {
        lb.align_seri_temp_pointwise = align_seri_temp(out.maps);
        for (double v : lb.align_seri_temp_pointwise) lb.align_st += v;
    }
    if (has_space) {
        lb.align_seri_space_rowwise = align_space_seri_rowwise(out.maps);
        const double k = double(out.maps.layers());
        for (std::size_t l = 0; l < out.maps.layers(); ++l) {
            lb.align_ssp += cross_dim_kl(out.maps.seri[l], out.maps.space[l]) / k;
            if (has_temp) lb.align_tsp += cross_dim_kl(out.maps.temp[l], out.maps.space[l]) / k;
        }
    }
    lb.total = total_loss(lb, lambda);
    return lb;
}

#define MADT_INSTANTIATE_LOSSES(R)                                                                \
    template Var<R> sym_kl_rows(Var<R>, Var<R>);                                                  \
    template Var<R> align_seri_temp(const std::vector<model::LayerMaps<R>>&);                     \
    template Var<R> cross_dim_kl(Var<R>, Var<R>);                                                 \
    template Var<R> cross_dim_kl_rowwise(Var<R>, Var<R>);                                         \
    template Var<R> align_space_seri_rowwise(const std::vector<model::LayerMaps<R>>&);             \
    template LossTerms<R> total_loss(const model::ForwardGraph<R>&, Var<R>, Var<R>, Var<R>, double);

MADT_INSTANTIATE_LOSSES(float)
MADT_INSTANTIATE_LOSSES(double)

}  // namespace madt::losses
