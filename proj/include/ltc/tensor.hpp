// Copyright 2026 The ltc-rerank Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "ltc/error.hpp"

namespace ltc {

/// Dense row-major matrix. Forward inference runs in float; the double
/// instantiation backs gradient checking.
template <typename T>
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, T fill = T{0})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<T> data);

  static Matrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<T> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const T> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }

  std::string shape_string() const;

  template <typename U>
  Matrix<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return Matrix<U>(rows_, cols_, std::move(out));
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

/// Additive-mask sentinel for blocked attention entries.
template <typename T>
inline constexpr T kMasked = -std::numeric_limits<T>::infinity();

template <typename T>
Matrix<T> matmul(const Matrix<T>& a, const Matrix<T>& b);

template <typename T>
Matrix<T> transpose(const Matrix<T>& m);

/// Row-wise softmax of `m + additive_mask`. Mask entries are 0 or kMasked.
/// A row whose entries are all masked comes back as zeros; its index is
/// appended to `fully_masked` when given.
template <typename T>
Matrix<T> softmax_rows(const Matrix<T>& m, const Matrix<T>& additive_mask,
                       std::vector<std::size_t>* fully_masked = nullptr);

template <typename T>
std::vector<T> rms_norm(std::span<const T> x, std::span<const T> gain, T eps);

/// rms_norm over each row. `inv_rms`, when given, receives 1/sqrt(mean(x^2)+eps)
/// per row for the backward pass.
template <typename T>
Matrix<T> rms_norm_rows(const Matrix<T>& x, std::span<const T> gain, T eps,
                        std::vector<T>* inv_rms = nullptr);

/// Rotary embedding on an n x d_head block: dimension pair (2i, 2i+1) of row t
/// rotates by positions[t] * base^(-2i/d_head). `inverse` rotates backwards,
/// which is also the transpose used by the backward pass.
template <typename T>
Matrix<T> rope_apply(const Matrix<T>& h, std::span<const std::int32_t> positions, double base,
                     bool inverse = false);

/// rope_apply on every head slice of an n x (num_heads * d_head) matrix.
template <typename T>
Matrix<T> rope_apply_heads(const Matrix<T>& h, std::span<const std::int32_t> positions,
                           std::size_t num_heads, double base, bool inverse = false);

/// Exact (erf) GELU and its derivative.
template <typename T>
T gelu(T x);
template <typename T>
T gelu_grad(T x);

/// xoshiro256** seeded through splitmix64. Bit-identical streams on every
/// platform, unlike std distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform01();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n);

  template <typename It>
  void shuffle(It first, It last) {
    const auto n = static_cast<std::uint64_t>(last - first);
    for (std::uint64_t i = n; i > 1; --i) {
      const auto j = below(i);
      std::swap(first[static_cast<std::ptrdiff_t>(i - 1)], first[static_cast<std::ptrdiff_t>(j)]);
    }
  }

 private:
  std::uint64_t s_[4];
};

}  // namespace ltc
