#pragma once

#include "madt/ndgrad/tensor.hpp"
#include "oracles.hpp"

namespace testutil {

inline madt::nd::Matrix to_matrix(const oracle::Mat& m) {
    madt::nd::Matrix out(m.size(), m.empty() ? 0 : m[0].size());
    for (std::size_t i = 0; i < m.size(); ++i)
        for (std::size_t j = 0; j < m[i].size(); ++j) out(i, j) = m[i][j];
    return out;
}

template <typename Real>
oracle::Mat to_mat(const madt::nd::Tensor2<Real>& t) {
    oracle::Mat out = oracle::zeros(t.rows(), t.cols());
    for (std::size_t i = 0; i < t.rows(); ++i)
        for (std::size_t j = 0; j < t.cols(); ++j) out[i][j] = double(t(i, j));
    return out;
}

template <typename A, typename B>
double max_abs_diff(const A& a, const B& b) {
    double m = 0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(double(a[i]) - double(b[i])));
    return m;
}

inline double max_abs_diff_mat(const oracle::Mat& a, const oracle::Mat& b) {
    double m = 0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, max_abs_diff(a[i], b[i]));
    return m;
}

}  // namespace testutil
