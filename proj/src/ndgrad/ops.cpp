#include "madt/ndgrad/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace madt::nd {
namespace {

template <typename Real>
using RowMat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Real>
using Map = Eigen::Map<RowMat<Real>>;
template <typename Real>
using CMap = Eigen::Map<const RowMat<Real>>;

template <typename Real>
CMap<Real> cmap(const Tensor2<Real>& t) {
    return CMap<Real>(t.data().data(), Eigen::Index(t.rows()), Eigen::Index(t.cols()));
}

template <typename Real>
Map<Real> gmap(std::vector<Real>& g, std::size_t r, std::size_t c) {
    return Map<Real>(g.data(), Eigen::Index(r), Eigen::Index(c));
}

template <typename Real>
CMap<Real> gcmap(const std::vector<Real>& g, std::size_t r, std::size_t c) {
    return CMap<Real>(g.data(), Eigen::Index(r), Eigen::Index(c));
}

template <typename Real>
void require_same_tape(Var<Real> a, Var<Real> b) {
    if (a.tape != b.tape || a.tape == nullptr) throw ContractError("operands recorded on different tapes");
}

template <typename Real>
void require_same_shape(const char* op, const Tensor2<Real>& a, const Tensor2<Real>& b) {
    if (!a.same_shape(b))
        throw DimensionError(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
}

template <typename Real>
bool needs(Var<Real> v) {
    return v.tape->needs_grad(v);
}

template <typename Real>
Real* slot(Tape<Real>& t, Var<Real> v) {
    return t.needs_grad(v) ? t.grad_slot(v).data() : nullptr;
}

}  // namespace

template <typename Real>
Var<Real> matmul(Var<Real> a, Var<Real> b) {
    require_same_tape(a, b);
    const auto& av = a.value();
    const auto& bv = b.value();
    if (av.cols() != bv.rows())
        throw DimensionError("matmul: inner dimensions differ, " + av.shape_str() + " x " + bv.shape_str());
    Tensor2<Real> out(av.rows(), bv.cols());
    Map<Real>(out.data().data(), Eigen::Index(out.rows()), Eigen::Index(out.cols())).noalias() = cmap(av) * cmap(bv);
    return a.tape->record(std::move(out), needs(a) || needs(b), [a, b](Tape<Real>& t, Var<Real>, const std::vector<Real>& g) {
        const auto& A = t.value(a);
        const auto& B = t.value(b);
        auto G = gcmap(g, A.rows(), B.cols());
        if (t.needs_grad(a)) gmap(t.grad_slot(a), A.rows(), A.cols()).noalias() += G * cmap(B).transpose();
        if (t.needs_grad(b)) gmap(t.grad_slot(b), B.rows(), B.cols()).noalias() += cmap(A).transpose() * G;
    });
}

template <typename Real>
Var<Real> matmul_nt(Var<Real> a, Var<Real> b) {
    require_same_tape(a, b);
    const auto& av = a.value();
    const auto& bv = b.value();
    if (av.cols() != bv.cols())
        throw DimensionError("matmul_nt: inner dimensions differ, " + av.shape_str() + " x " + bv.shape_str() + "^T");
    Tensor2<Real> out(av.rows(), bv.rows());
    Map<Real>(out.data().data(), Eigen::Index(out.rows()), Eigen::Index(out.cols())).noalias() =
        cmap(av) * cmap(bv).transpose();
    return a.tape->record(std::move(out), needs(a) || needs(b), [a, b](Tape<Real>& t, Var<Real>, const std::vector<Real>& g) {
        const auto& A = t.value(a);
        const auto& B = t.value(b);
        auto G = gcmap(g, A.rows(), B.rows());
        if (t.needs_grad(a)) gmap(t.grad_slot(a), A.rows(), A.cols()).noalias() += G * cmap(B);
        if (t.needs_grad(b)) gmap(t.grad_slot(b), B.rows(), B.cols()).noalias() += G.transpose() * cmap(A);
    });
}

template <typename Real>
Var<Real> elementwise(Var<Real> a, Var<Real> b, Elementwise kind) {
    require_same_tape(a, b);
    const auto& av = a.value();
    const auto& bv = b.value();
    require_same_shape("elementwise", av, bv);
    Tensor2<Real> out(av.rows(), av.cols());
    auto o = out.data();
    auto x = av.data();
    auto y = bv.data();
    switch (kind) {
        case Elementwise::add:
            for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] + y[i];
            break;
        case Elementwise::sub:
            for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] - y[i];
            break;
        case Elementwise::mul:
            for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] * y[i];
            break;
    }
    return a.tape->record(std::move(out), needs(a) || needs(b),
                          [a, b, kind](Tape<Real>& t, Var<Real>, const std::vector<Real>& g) {
                              const std::size_t n = g.size();
                              if (Real* ga = slot(t, a)) {
                                  if (kind == Elementwise::mul) {
                                      auto y = t.value(b).data();
                                      for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * y[i];
                                  } else {
                                      for (std::size_t i = 0; i < n; ++i) ga[i] += g[i];
                                  }
                              }
                              if (Real* gb = slot(t, b)) {
                                  if (kind == Elementwise::mul) {
                                      auto x = t.value(a).data();
                                      for (std::size_t i = 0; i < n; ++i) gb[i] += g[i] * x[i];
                                  } else if (kind == Elementwise::sub) {
                                      for (std::size_t i = 0; i < n; ++i) gb[i] -= g[i];
                                  } else {
                                      for (std::size_t i = 0; i < n; ++i) gb[i] += g[i];
                                  }
                              }
                          });
}

template <typename Real>
Var<Real> add_row(Var<Real> a, Var<Real> row) {
    require_same_tape(a, row);
    const auto& av = a.value();
    const auto& rv = row.value();
    if (rv.rows() != 1 || rv.cols() != av.cols())
        throw DimensionError("add_row: expected 1x" + std::to_string(av.cols()) + " row, got " + rv.shape_str());
    Tensor2<Real> out = av;
    out.requires_grad = false;
    out.grad.clear();
    for (std::size_t i = 0; i < out.rows(); ++i) {
        auto r = out.row(i);
        for (std::size_t j = 0; j < r.size(); ++j) r[j] += rv(0, j);
    }
    return a.tape->record(std::move(out), needs(a) || needs(row),
                          [a, row](Tape<Real>& t, Var<Real>, const std::vector<Real>& g) {
                              const auto& A = t.value(a);
                              if (Real* ga = slot(t, a))
                                  for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                              if (Real* gr = slot(t, row))
                                  for (std::size_t i = 0; i < A.rows(); ++i)
                                      for (std::size_t j = 0; j < A.cols(); ++j) gr[j] += g[i * A.cols() + j];
                          });
}

template <typename Real>
Var<Real> scale(Var<Real> a, Real c) {
    const auto& av = a.value();
    Tensor2<Real> out(av.rows(), av.cols());
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = av.data()[i] * c;
    return a.tape->record(std::move(out), needs(a), [a, c](Tape<Real>& t, Var<Real>, const std::vector<Real>& g) {
        Real* ga = t.grad_slot(a).data();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += c * g[i];
    });
}

template <typename Real>
Var<Real> transpose(Var<Real> a) {
    return a.tape->record(a.value().transposed(), needs(a), [a](Tape<Real>& t, Var<Real>, const std::vector<Real>& g) {
        const auto& A = t.value(a);
        Real* ga = t.grad_slot(a).data();
        for (std::size_t i = 0; i < A.rows(); ++i)
            for (std::size_t j = 0; j < A.cols(); ++j) ga[i * A.cols() + j] += g[j * A.rows() + i];
    });
}

template <typename Real>
Var<Real> frobenius_sq(Var<Real> a) {
    const auto& av = a.value();
    Real s = 0;
    for (Real x : av.data()) s += x * x;
    return a.tape->record(Tensor2<Real>(1, 1, s), needs(a), [a](Tape<Real>& t, Var<Real>, const std::vector<Real>& g) {
        auto x = t.value(a).data();
        Real* ga = t.grad_slot(a).data();
        for (std::size_t i = 0; i < x.size(); ++i) ga[i] += Real(2) * x[i] * g[0];
    });
}

template <typename Real>
Var<Real> sum(Var<Real> a) {
    Real s = 0;
    for (Real x : a.value().data()) s += x;
    return a.tape->record(Tensor2<Real>(1, 1, s), needs(a), [a](Tape<Real>& t, Var<Real>, const std::vector<Real>& g) {
        auto& ga = t.grad_slot(a);
        for (auto& x : ga) x += g[0];
    });
}

template <typename Real>
Var<Real> row_sum(Var<Real> a) {
    const auto& av = a.value();
    Tensor2<Real> out(av.rows(), 1);
    for (std::size_t i = 0; i < av.rows(); ++i) {
        Real s = 0;
        for (Real x : av.row(i)) s += x;
        out(i, 0) = s;
    }
    return a.tape->record(std::move(out), needs(a), [a](Tape<Real>& t, Var<Real>, const std::vector<Real>& g) {
        const auto& A = t.value(a);
        Real* ga = t.grad_slot(a).data();
        for (std::size_t i = 0; i < A.rows(); ++i)
            for (std::size_t j = 0; j < A.cols(); ++j) ga[i * A.cols() + j] += g[i];
    });
}

template <typename Real>
Var<Real> concat_cols(const std::vector<Var<Real>>& parts) {
    if (parts.empty()) throw DimensionError("concat_cols: no inputs");
    const std::size_t rows = parts.front().rows();
    std::size_t cols = 0;
    bool ng = false;
    for (const auto& p : parts) {
        require_same_tape(parts.front(), p);
        if (p.rows() != rows)
            throw DimensionError("concat_cols: row counts differ, " + parts.front().value().shape_str() + " vs " +
                                 p.value().shape_str());
        cols += p.cols();
        ng = ng || needs(p);
    }
    Tensor2<Real> out(rows, cols);
    std::size_t off = 0;
    for (const auto& p : parts) {
        const auto& pv = p.value();
        for (std::size_t i = 0; i < rows; ++i) std::copy(pv.row(i).begin(), pv.row(i).end(), out.row(i).begin() + off);
        off += pv.cols();
    }
    return parts.front().tape->record(std::move(out), ng, [parts](Tape<Real>& t, Var<Real> self, const std::vector<Real>& g) {
        const std::size_t total = t.value(self).cols();
        std::size_t off = 0;
        for (const auto& p : parts) {
            const auto& pv = t.value(p);
            if (Real* gp = slot(t, p))
                for (std::size_t i = 0; i < pv.rows(); ++i)
                    for (std::size_t j = 0; j < pv.cols(); ++j) gp[i * pv.cols() + j] += g[i * total + off + j];
            off += pv.cols();
        }
    });
}

template <typename Real>
Var<Real> slice_cols(Var<Real> a, std::size_t begin, std::size_t count) {
    const auto& av = a.value();
    if (begin + count > av.cols())
        throw DimensionError("slice_cols: columns [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                             ") out of range for " + av.shape_str());
    Tensor2<Real> out(av.rows(), count);
    for (std::size_t i = 0; i < av.rows(); ++i)
        std::copy_n(av.row(i).begin() + begin, count, out.row(i).begin());
    return a.tape->record(std::move(out), needs(a), [a, begin, count](Tape<Real>& t, Var<Real>, const std::vector<Real>& g) {
        const auto& A = t.value(a);
        Real* ga = t.grad_slot(a).data();
        for (std::size_t i = 0; i < A.rows(); ++i)
            for (std::size_t j = 0; j < count; ++j) ga[i * A.cols() + begin + j] += g[i * count + j];
    });
}

template <typename Real>
std::vector<Var<Real>> split_cols(Var<Real> a, std::size_t parts) {
    const std::size_t cols = a.cols();
    if (parts == 0 || cols % parts != 0)
        throw DimensionError("split_cols: " + std::to_string(cols) + " columns not divisible into " +
                             std::to_string(parts) + " parts");
    std::vector<Var<Real>> out;
    out.reserve(parts);
    const std::size_t width = cols / parts;
    for (std::size_t p = 0; p < parts; ++p) out.push_back(slice_cols(a, p * width, width));
    return out;
}

template <typename Real>
Var<Real> relu(Var<Real> a) {
    const auto& av = a.value();
    Tensor2<Real> out(av.rows(), av.cols());
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = std::max(av.data()[i], Real(0));
    return a.tape->record(std::move(out), needs(a), [a](Tape<Real>& t, Var<Real>, const std::vector<Real>& g) {
        auto x = t.value(a).data();
        Real* ga = t.grad_slot(a).data();
        for (std::size_t i = 0; i < g.size(); ++i)
            if (x[i] > Real(0)) ga[i] += g[i];
    });
}

template <typename Real>
Var<Real> gelu(Var<Real> a) {
    const auto& av = a.value();
    Tensor2<Real> out(av.rows(), av.cols());
    const Real inv_sqrt2 = Real(1) / std::sqrt(Real(2));
    for (std::size_t i = 0; i < out.size(); ++i) {
        const Real x = av.data()[i];
        out.data()[i] = Real(0.5) * x * (Real(1) + std::erf(x * inv_sqrt2));
    }
    return a.tape->record(std::move(out), needs(a), [a](Tape<Real>& t, Var<Real>, const std::vector<Real>& g) {
        auto x = t.value(a).data();
        Real* ga = t.grad_slot(a).data();
        const Real inv_sqrt2 = Real(1) / std::sqrt(Real(2));
        const Real inv_sqrt2pi = Real(1) / std::sqrt(Real(2) * std::numbers::pi_v<Real>);
        for (std::size_t i = 0; i < g.size(); ++i) {
            const Real cdf = Real(0.5) * (Real(1) + std::erf(x[i] * inv_sqrt2));
            const Real pdf = inv_sqrt2pi * std::exp(Real(-0.5) * x[i] * x[i]);
            ga[i] += g[i] * (cdf + x[i] * pdf);
        }
    });
}

template <typename Real>
Var<Real> log(Var<Real> a) {
    const auto& av = a.value();
    Tensor2<Real> out(av.rows(), av.cols());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const Real x = av.data()[i];
        if (!(x > Real(0))) throw NumericError("log: nonpositive entry " + std::to_string(x) + " at flat index " + std::to_string(i));
        out.data()[i] = std::log(x);
    }
    return a.tape->record(std::move(out), needs(a), [a](Tape<Real>& t, Var<Real>, const std::vector<Real>& g) {
        auto x = t.value(a).data();
        Real* ga = t.grad_slot(a).data();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / x[i];
    });
}

template <typename Real>
Var<Real> log_floor(Var<Real> a, Real floor) {
    const auto& av = a.value();
    Tensor2<Real> out(av.rows(), av.cols());
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = std::log(std::max(av.data()[i], floor));
    return a.tape->record(std::move(out), needs(a), [a, floor](Tape<Real>& t, Var<Real>, const std::vector<Real>& g) {
        auto x = t.value(a).data();
        Real* ga = t.grad_slot(a).data();
        for (std::size_t i = 0; i < g.size(); ++i)
            if (x[i] > floor) ga[i] += g[i] / x[i];
    });
}

template <typename Real>
Var<Real> softmax_rows(Var<Real> a) {
    const auto& av = a.value();
    Tensor2<Real> out(av.rows(), av.cols());
    for (std::size_t i = 0; i < av.rows(); ++i) {
        auto in = av.row(i);
        auto o = out.row(i);
        Real mx = -std::numeric_limits<Real>::infinity();
        for (Real x : in) {
            if (!std::isfinite(x)) throw NumericError("softmax_rows: non-finite input in row " + std::to_string(i));
            mx = std::max(mx, x);
        }
        Real s = 0;
        for (std::size_t j = 0; j < in.size(); ++j) {
            o[j] = std::exp(in[j] - mx);
            s += o[j];
        }
        for (auto& x : o) x /= s;
    }
    return a.tape->record(std::move(out), needs(a), [a](Tape<Real>& t, Var<Real> self, const std::vector<Real>& g) {
        const auto& Y = t.value(self);
        Real* ga = t.grad_slot(a).data();
        const std::size_t c = Y.cols();
        for (std::size_t i = 0; i < Y.rows(); ++i) {
            auto y = Y.row(i);
            Real dot = 0;
            for (std::size_t j = 0; j < c; ++j) dot += g[i * c + j] * y[j];
            for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += y[j] * (g[i * c + j] - dot);
        }
    });
}

template <typename Real>
Var<Real> layer_norm(Var<Real> a, Var<Real> gain, Var<Real> bias, Real eps) {
    require_same_tape(a, gain);
    require_same_tape(a, bias);
    const auto& av = a.value();
    const auto& gv = gain.value();
    const auto& bv = bias.value();
    const std::size_t c = av.cols();
    if (gv.rows() != 1 || gv.cols() != c || bv.rows() != 1 || bv.cols() != c)
        throw DimensionError("layer_norm: gain/bias must be 1x" + std::to_string(c) + ", got " + gv.shape_str() +
                             " and " + bv.shape_str());
    Tensor2<Real> out(av.rows(), c);
    std::vector<Real> normed(av.size());
    std::vector<Real> inv_std(av.rows());
    for (std::size_t i = 0; i < av.rows(); ++i) {
        auto x = av.row(i);
        Real mean = 0;
        for (Real v : x) mean += v;
        mean /= Real(c);
        Real var = 0;
        for (Real v : x) var += (v - mean) * (v - mean);
        var /= Real(c);
        inv_std[i] = Real(1) / std::sqrt(var + eps);
        for (std::size_t j = 0; j < c; ++j) {
            const Real z = (x[j] - mean) * inv_std[i];
            normed[i * c + j] = z;
            out(i, j) = z * gv(0, j) + bv(0, j);
        }
    }
    const bool ng = needs(a) || needs(gain) || needs(bias);
    return a.tape->record(std::move(out), ng,
                          [a, gain, bias, normed = std::move(normed), inv_std = std::move(inv_std)](
                              Tape<Real>& t, Var<Real>, const std::vector<Real>& g) {
                              const auto& G = t.value(gain);
                              const std::size_t c = G.cols();
                              const std::size_t rows = inv_std.size();
                              if (Real* gg = slot(t, gain))
                                  for (std::size_t i = 0; i < rows; ++i)
                                      for (std::size_t j = 0; j < c; ++j) gg[j] += g[i * c + j] * normed[i * c + j];
                              if (Real* gb = slot(t, bias))
                                  for (std::size_t i = 0; i < rows; ++i)
                                      for (std::size_t j = 0; j < c; ++j) gb[j] += g[i * c + j];
                              if (Real* ga = slot(t, a)) {
                                  for (std::size_t i = 0; i < rows; ++i) {
                                      Real mean_dz = 0;
                                      Real mean_dz_z = 0;
                                      for (std::size_t j = 0; j < c; ++j) {
                                          const Real dz = g[i * c + j] * G(0, j);
                                          mean_dz += dz;
                                          mean_dz_z += dz * normed[i * c + j];
                                      }
                                      mean_dz /= Real(c);
                                      mean_dz_z /= Real(c);
                                      for (std::size_t j = 0; j < c; ++j) {
                                          const Real dz = g[i * c + j] * G(0, j);
                                          ga[i * c + j] += inv_std[i] * (dz - mean_dz - normed[i * c + j] * mean_dz_z);
                                      }
                                  }
                              }
                          });
}

#define MADT_INSTANTIATE_OPS(R)                                                            \
    template Var<R> matmul(Var<R>, Var<R>);                                                \
    template Var<R> matmul_nt(Var<R>, Var<R>);                                             \
    template Var<R> elementwise(Var<R>, Var<R>, Elementwise);                              \
    template Var<R> add_row(Var<R>, Var<R>);                                               \
    template Var<R> scale(Var<R>, R);                                                      \
    template Var<R> transpose(Var<R>);                                                     \
    template Var<R> frobenius_sq(Var<R>);                                                  \
    template Var<R> sum(Var<R>);                                                           \
    template Var<R> row_sum(Var<R>);                                                       \
    template Var<R> concat_cols(const std::vector<Var<R>>&);                               \
    template Var<R> slice_cols(Var<R>, std::size_t, std::size_t);                          \
    template std::vector<Var<R>> split_cols(Var<R>, std::size_t);                          \
    template Var<R> relu(Var<R>);                                                          \
    template Var<R> gelu(Var<R>);                                                          \
    template Var<R> log(Var<R>);                                                           \
    template Var<R> log_floor(Var<R>, R);                                                  \
    template Var<R> softmax_rows(Var<R>);                                                  \
    template Var<R> layer_norm(Var<R>, Var<R>, Var<R>, R);

MADT_INSTANTIATE_OPS(float)
MADT_INSTANTIATE_OPS(double)

}  // namespace madt::nd
