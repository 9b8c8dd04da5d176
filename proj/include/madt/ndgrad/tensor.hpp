#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "madt/errors.hpp"

namespace madt::nd {

/// Dense row-major 2-D tensor. Parameters set `requires_grad` and receive
/// gradients in `grad` (same shape as the data, allocated on first backward).
template <typename Real>
class Tensor2 {
public:
    using value_type = Real;

    Tensor2() = default;
    Tensor2(std::size_t rows, std::size_t cols, Real fill = Real(0))
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Tensor2(std::size_t rows, std::size_t cols, std::vector<Real> data);

    static Tensor2 from_rows(std::initializer_list<std::initializer_list<Real>> rows);
    static Tensor2 identity(std::size_t n);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    Real& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    Real operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<Real> data() noexcept { return data_; }
    std::span<const Real> data() const noexcept { return data_; }
    std::span<Real> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const Real> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }
    std::vector<Real>& storage() noexcept { return data_; }
    const std::vector<Real>& storage() const noexcept { return data_; }

    bool requires_grad = false;
    std::vector<Real> grad;

    bool has_grad() const noexcept { return grad.size() == data_.size() && !data_.empty(); }
    void zero_grad() { grad.assign(data_.size(), Real(0)); }

    bool same_shape(const Tensor2& o) const noexcept { return rows_ == o.rows_ && cols_ == o.cols_; }
    std::string shape_str() const { return std::to_string(rows_) + "x" + std::to_string(cols_); }

    Tensor2 transposed() const;

    template <typename Other>
    Tensor2<Other> cast() const {
        Tensor2<Other> out(rows_, cols_);
        for (std::size_t i = 0; i < data_.size(); ++i) out.storage()[i] = static_cast<Other>(data_[i]);
        return out;
    }

    // Value equality (data and shape only).
    bool operator==(const Tensor2& o) const { return same_shape(o) && data_ == o.data_; }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<Real> data_;
};

template <typename Real>
Tensor2<Real>::Tensor2(std::size_t rows, std::size_t cols, std::vector<Real> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows * cols)
        throw DimensionError("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                             std::to_string(rows) + "x" + std::to_string(cols));
}

template <typename Real>
Tensor2<Real> Tensor2<Real>::from_rows(std::initializer_list<std::initializer_list<Real>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r ? rows.begin()->size() : 0;
    std::vector<Real> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
        if (row.size() != c) throw DimensionError("ragged initializer for Tensor2");
        data.insert(data.end(), row.begin(), row.end());
    }
    return Tensor2(r, c, std::move(data));
}

template <typename Real>
Tensor2<Real> Tensor2<Real>::identity(std::size_t n) {
    Tensor2 out(n, n);
    for (std::size_t i = 0; i < n; ++i) out(i, i) = Real(1);
    return out;
}

template <typename Real>
Tensor2<Real> Tensor2<Real>::transposed() const {
    Tensor2 out(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t j = 0; j < cols_; ++j) out(j, i) = (*this)(i, j);
    return out;
}

using Matrix = Tensor2<double>;

}  // namespace madt::nd
