// Copyright 2026 The ltc-rerank Authors
// SPDX-License-Identifier: Apache-2.0

#include "ltc/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace ltc {

template <typename T>
Matrix<T>::Matrix(std::size_t rows, std::size_t cols, std::vector<T> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw ShapeError("matrix data length " + std::to_string(data_.size()) + " does not match " +
                     std::to_string(rows_) + "x" + std::to_string(cols_));
  }
}

template <typename T>
Matrix<T> Matrix<T>::identity(std::size_t n) {
  Matrix<T> m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = T{1};
  return m;
}

template <typename T>
std::string Matrix<T>::shape_string() const {
  return "(" + std::to_string(rows_) + "x" + std::to_string(cols_) + ")";
}

// The one hot loop of the engine. i-k-j order keeps the inner loop contiguous
// in both b and out so the compiler can vectorize it.
template <typename T>
Matrix<T> matmul(const Matrix<T>& a, const Matrix<T>& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul shape mismatch: " + a.shape_string() + " x " + b.shape_string());
  }
  const std::size_t n = a.rows();
  const std::size_t inner = a.cols();
  const std::size_t m = b.cols();
  Matrix<T> out(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    T* orow = out.row(i).data();
    const T* arow = a.row(i).data();
    for (std::size_t k = 0; k < inner; ++k) {
      const T aik = arow[k];
      const T* brow = b.row(k).data();
      for (std::size_t j = 0; j < m; ++j) orow[j] += aik * brow[j];
    }
  }
  return out;
}

template <typename T>
Matrix<T> transpose(const Matrix<T>& m) {
  Matrix<T> out(m.cols(), m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out(j, i) = m(i, j);
  return out;
}

template <typename T>
Matrix<T> softmax_rows(const Matrix<T>& m, const Matrix<T>& additive_mask,
                       std::vector<std::size_t>* fully_masked) {
  if (m.rows() != additive_mask.rows() || m.cols() != additive_mask.cols()) {
    throw ShapeError("softmax mask shape " + additive_mask.shape_string() +
                     " does not match scores " + m.shape_string());
  }
  Matrix<T> out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto in = m.row(i);
    auto mask = additive_mask.row(i);
    auto o = out.row(i);
    T peak = kMasked<T>;
    for (std::size_t j = 0; j < in.size(); ++j) {
      if (mask[j] == kMasked<T>) continue;
      peak = std::max(peak, in[j] + mask[j]);
    }
    if (peak == kMasked<T>) {
      if (fully_masked) fully_masked->push_back(i);
      continue;
    }
    T total{0};
    for (std::size_t j = 0; j < in.size(); ++j) {
      if (mask[j] == kMasked<T>) continue;
      o[j] = std::exp(in[j] + mask[j] - peak);
      total += o[j];
    }
    for (auto& v : o) v /= total;
  }
  return out;
}

template <typename T>
std::vector<T> rms_norm(std::span<const T> x, std::span<const T> gain, T eps) {
  if (x.size() != gain.size()) {
    throw ShapeError("rms_norm length mismatch: " + std::to_string(x.size()) + " vs gain " +
                     std::to_string(gain.size()));
  }
  T sq{0};
  for (T v : x) sq += v * v;
  const T mean = x.empty() ? T{0} : sq / static_cast<T>(x.size());
  const T denom = std::sqrt(mean + eps);
  std::vector<T> out(x.size());
  // eps = 0 on an all-zero row would divide by zero; the row is returned as zeros.
  if (denom == T{0}) return out;
  const T inv = T{1} / denom;
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * inv * gain[i];
  return out;
}

template <typename T>
Matrix<T> rms_norm_rows(const Matrix<T>& x, std::span<const T> gain, T eps,
                        std::vector<T>* inv_rms) {
  if (x.cols() != gain.size()) {
    throw ShapeError("rms_norm gain length " + std::to_string(gain.size()) +
                     " does not match rows of " + x.shape_string());
  }
  Matrix<T> out(x.rows(), x.cols());
  if (inv_rms) inv_rms->assign(x.rows(), T{0});
  const T cols = static_cast<T>(x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto in = x.row(r);
    T sq{0};
    for (T v : in) sq += v * v;
    const T denom = std::sqrt(sq / cols + eps);
    if (denom == T{0}) continue;
    const T inv = T{1} / denom;
    if (inv_rms) (*inv_rms)[r] = inv;
    auto o = out.row(r);
    for (std::size_t c = 0; c < in.size(); ++c) o[c] = in[c] * inv * gain[c];
  }
  return out;
}

template <typename T>
Matrix<T> rope_apply(const Matrix<T>& h, std::span<const std::int32_t> positions, double base,
                     bool inverse) {
  if (h.cols() % 2 != 0) {
    throw ConfigError("rope_apply needs an even head dimension, got " + std::to_string(h.cols()));
  }
  if (positions.size() != h.rows()) {
    throw ShapeError("rope_apply: " + std::to_string(positions.size()) + " positions for " +
                     h.shape_string());
  }
  const std::size_t d = h.cols();
  Matrix<T> out(h.rows(), d);
  for (std::size_t t = 0; t < h.rows(); ++t) {
    auto in = h.row(t);
    auto o = out.row(t);
    for (std::size_t i = 0; i < d / 2; ++i) {
      const double freq = std::pow(base, -2.0 * static_cast<double>(i) / static_cast<double>(d));
      double angle = static_cast<double>(positions[t]) * freq;
      if (inverse) angle = -angle;
      const T c = static_cast<T>(std::cos(angle));
      const T s = static_cast<T>(std::sin(angle));
      const T x0 = in[2 * i];
      const T x1 = in[2 * i + 1];
      o[2 * i] = x0 * c - x1 * s;
      o[2 * i + 1] = x0 * s + x1 * c;
    }
  }
  return out;
}

template <typename T>
Matrix<T> rope_apply_heads(const Matrix<T>& h, std::span<const std::int32_t> positions,
                           std::size_t num_heads, double base, bool inverse) {
  if (num_heads == 0 || h.cols() % num_heads != 0) {
    throw ConfigError("hidden size " + std::to_string(h.cols()) + " not divisible by " +
                      std::to_string(num_heads) + " heads");
  }
  const std::size_t d = h.cols() / num_heads;
  Matrix<T> out(h.rows(), h.cols());
  Matrix<T> block(h.rows(), d);
  for (std::size_t head = 0; head < num_heads; ++head) {
    for (std::size_t t = 0; t < h.rows(); ++t)
      std::copy_n(h.row(t).begin() + head * d, d, block.row(t).begin());
    const auto rotated = rope_apply(block, positions, base, inverse);
    for (std::size_t t = 0; t < h.rows(); ++t)
      std::copy_n(rotated.row(t).begin(), d, out.row(t).begin() + head * d);
  }
  return out;
}

template <typename T>
T gelu(T x) {
  return T{0.5} * x * (T{1} + std::erf(x / std::numbers::sqrt2_v<T>));
}

template <typename T>
T gelu_grad(T x) {
  const T cdf = T{0.5} * (T{1} + std::erf(x / std::numbers::sqrt2_v<T>));
  const T pdf = std::exp(T{-0.5} * x * x) / std::sqrt(T{2} * std::numbers::pi_v<T>);
  return cdf + x * pdf;
}

namespace {
std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}
std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
}  // namespace

Rng::Rng(std::uint64_t seed) {
  std::uint64_t st = seed;
  for (auto& s : s_) s = splitmix64(st);
}

std::uint64_t Rng::next_u64() {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Rng::uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw ArgumentError("Rng::below(0)");
  // Rejection sampling keeps the draw unbiased.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % n;
}

#define LTC_INSTANTIATE(T)                                                                    \
  template class Matrix<T>;                                                                   \
  template Matrix<T> matmul(const Matrix<T>&, const Matrix<T>&);                              \
  template Matrix<T> transpose(const Matrix<T>&);                                             \
  template Matrix<T> softmax_rows(const Matrix<T>&, const Matrix<T>&,                         \
                                  std::vector<std::size_t>*);                                 \
  template std::vector<T> rms_norm(std::span<const T>, std::span<const T>, T);                \
  template Matrix<T> rms_norm_rows(const Matrix<T>&, std::span<const T>, T, std::vector<T>*); \
  template Matrix<T> rope_apply(const Matrix<T>&, std::span<const std::int32_t>, double,      \
                                bool);                                                        \
  template Matrix<T> rope_apply_heads(const Matrix<T>&, std::span<const std::int32_t>,        \
                                      std::size_t, double, bool);                             \
  template T gelu(T);                                                                         \
  template T gelu_grad(T);

LTC_INSTANTIATE(float)
LTC_INSTANTIATE(double)

#undef LTC_INSTANTIATE

}  // namespace ltc
