#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "t1/error.hpp"

namespace t1 {

inline constexpr double kUnitNormTolerance = 1e-6;

inline double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

inline double l2_norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

// Fixed-dimension real vector that remembers whether it has been
// L2-normalized. Values are always finite.
class Embedding {
 public:
  Embedding() = default;

  explicit Embedding(std::vector<double> values, bool normalized = false)
      : values_(std::move(values)), normalized_(normalized) {
    require(!values_.empty(), Errc::kInvalidInput, "embedding dimension must be positive");
    for (double v : values_) {
      require(std::isfinite(v), Errc::kInvalidInput, "embedding contains NaN or Inf");
    }
    if (normalized_) {
      require(std::abs(l2_norm(values_) - 1.0) < kUnitNormTolerance, Errc::kInvariant,
              "embedding flagged normalized but has norm " + std::to_string(l2_norm(values_)));
    }
  }

  static Embedding normalized_from(std::vector<double> values) {
    Embedding e(std::move(values));
    e.normalize();
    return e;
  }

  std::size_t dim() const noexcept { return values_.size(); }
  bool normalized() const noexcept { return normalized_; }
  std::span<const double> values() const noexcept { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }

  double norm() const { return l2_norm(values_); }

  void normalize() {
    const double n = norm();
    require(n > 0.0, Errc::kInvalidInput, "cannot normalize a zero vector");
    for (double& v : values_) v /= n;
    normalized_ = true;
  }

  // Rounds every component to the nearest binary32 value, the precision of the
  // on-disk index format. Normalization state is kept: the rounding moves the
  // norm by far less than kUnitNormTolerance.
  void round_to_float() {
    for (double& v : values_) v = static_cast<double>(static_cast<float>(v));
  }

  friend bool operator==(const Embedding&, const Embedding&) = default;

 private:
  std::vector<double> values_;
  bool normalized_ = false;
};

}  // namespace t1
