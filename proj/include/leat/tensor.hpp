/* Copyright 2026 The LEAT Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "leat/error.hpp"
#include "leat/random.hpp"

namespace leat {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) out += ",";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

/// Dense row-major array of doubles. Shapes are non-empty lists of positive
/// sizes; a scalar is shape [1].
class Tensor {
 public:
  Tensor() : shape_{1}, data_(1, 0.0) {}

  explicit Tensor(Shape shape, double fill = 0.0)
      : shape_(std::move(shape)), data_(checked_numel(shape_), fill) {}

  Tensor(Shape shape, std::vector<double> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (checked_numel(shape_) != data_.size()) {
      throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                           " does not match shape " + shape_string(shape_));
    }
  }

  static Tensor vector(std::initializer_list<double> values) {
    return Tensor({values.size()}, std::vector<double>(values));
  }

  static Tensor vector(std::vector<double> values) {
    const std::size_t n = values.size();
    return Tensor({n}, std::move(values));
  }

  static Tensor scalar(double value) { return Tensor({1}, {value}); }

  static Tensor zeros_like(const Tensor& t) { return Tensor(t.shape()); }

  static Tensor uniform(Shape shape, Rng& rng, double lo, double hi) {
    Tensor t(std::move(shape));
    for (double& v : t.data_) v = rng.uniform(lo, hi);
    return t;
  }

  static Tensor normal(Shape shape, Rng& rng, double stddev = 1.0) {
    Tensor t(std::move(shape));
    for (double& v : t.data_) v = rng.normal(0.0, stddev);
    return t;
  }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t numel() const { return data_.size(); }
  bool is_scalar() const { return data_.size() == 1; }

  std::span<const double> values() const { return data_; }
  std::span<double> values() { return data_; }
  const std::vector<double>& data() const { return data_; }

  double operator[](std::size_t i) const { return data_[i]; }
  double& operator[](std::size_t i) { return data_[i]; }

  double item() const {
    if (!is_scalar()) {
      throw DimensionError("item() on non-scalar tensor of shape " +
                           shape_string(shape_));
    }
    return data_[0];
  }

  Tensor reshaped(Shape shape) const { return Tensor(std::move(shape), data_); }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(),
                       [](double v) { return std::isfinite(v); });
  }

  // Bitwise-equal shape and values.
  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  static std::size_t checked_numel(const Shape& shape) {
    if (shape.empty() ||
        std::any_of(shape.begin(), shape.end(),
                    [](std::size_t d) { return d == 0; })) {
      throw DimensionError("invalid tensor shape " + shape_string(shape));
    }
    return shape_numel(shape);
  }

  Shape shape_;
  std::vector<double> data_;
};

inline void require_same_shape(const Tensor& a, const Tensor& b,
                               const char* what) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(what) + ": shape mismatch " +
                         shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

// Plain (untracked) element-wise helpers.

template <typename Fn>
Tensor map(const Tensor& a, Fn&& fn) {
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.numel(); ++i) out[i] = fn(a[i]);
  return out;
}

template <typename Fn>
Tensor zip(const Tensor& a, const Tensor& b, Fn&& fn, const char* what) {
  require_same_shape(a, b, what);
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.numel(); ++i) out[i] = fn(a[i], b[i]);
  return out;
}

inline Tensor operator+(const Tensor& a, const Tensor& b) {
  return zip(a, b, std::plus<>(), "add");
}

inline Tensor operator-(const Tensor& a, const Tensor& b) {
  return zip(a, b, std::minus<>(), "subtract");
}

inline Tensor operator*(double s, const Tensor& a) {
  return map(a, [s](double v) { return s * v; });
}

inline Tensor& operator+=(Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "accumulate");
  for (std::size_t i = 0; i < a.numel(); ++i) a[i] += b[i];
  return a;
}

// sign(0) == 0.
inline Tensor sign(const Tensor& a) {
  return map(a, [](double v) { return static_cast<double>((v > 0.0) - (v < 0.0)); });
}

inline double l2_norm(const Tensor& a) {
  double sum = 0.0;
  for (double v : a.values()) sum += v * v;
  return std::sqrt(sum);
}

inline double linf_norm(const Tensor& a) {
  double m = 0.0;
  for (double v : a.values()) m = std::max(m, std::abs(v));
  return m;
}

inline double dot(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "dot");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) sum += a[i] * b[i];
  return sum;
}

// Cosine similarity; 0 when either side is the zero vector.
inline double cosine_similarity(const Tensor& a, const Tensor& b) {
  const double na = l2_norm(a);
  const double nb = l2_norm(b);
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot(a, b) / (na * nb);
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  return linf_norm(a - b);
}

// Element-wise clamp to [lo, hi].
inline Tensor clip_range(const Tensor& input, const Tensor& lo, const Tensor& hi) {
  require_same_shape(input, lo, "clip_range");
  require_same_shape(input, hi, "clip_range");
  Tensor out(input.shape());
  for (std::size_t i = 0; i < input.numel(); ++i) {
    if (lo[i] > hi[i]) {
      throw DimensionError("clip_range: lower bound exceeds upper bound at index " +
                           std::to_string(i));
    }
    out[i] = std::clamp(input[i], lo[i], hi[i]);
  }
  return out;
}

inline Tensor clip_range(const Tensor& input, double lo, double hi) {
  return map(input, [lo, hi](double v) { return std::clamp(v, lo, hi); });
}

}  // namespace leat
