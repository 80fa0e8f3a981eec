#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "setret/error.hpp"

namespace setret {

// Embeddings are stored as 32-bit floats; every reduction over them (dot
// products, norms, sums) accumulates in 64-bit so results do not depend on
// how a compiler happens to reorder a float accumulator.
inline constexpr double kUnitNormTolerance = 1e-6;
inline constexpr double kZeroNormThreshold = 1e-12;

// A point on the unit sphere in R^d. Construct through `normalize` (or
// `Embedding::unchecked` for data already known to be unit norm, e.g. a
// bank loaded with normalization on).
struct Embedding {
  std::vector<float> values;

  std::size_t dim() const { return values.size(); }
  std::span<const float> span() const { return values; }

  static Embedding unchecked(std::vector<float> v) { return Embedding{std::move(v)}; }

  bool operator==(const Embedding&) const = default;
};

// L2 norm with 64-bit accumulation.
double l2_norm(std::span<const float> v);
double l2_norm(std::span<const double> v);

// Scales `v` to unit L2 norm. Vectors already unit within kUnitNormTolerance
// pass through bit-for-bit, which makes normalize idempotent.
// Raises NonFinite for NaN/Inf entries and ZeroVector when the norm is
// below kZeroNormThreshold (or the input is empty).
Embedding normalize(std::span<const float> v);
Embedding normalize(std::span<const double> v);

// Dot product of unit vectors, clamped to [-1, 1] so downstream exponentials
// and acos-style diagnostics never see 1 + epsilon.
double cosine_sim(const Embedding& a, const Embedding& b);

// 1 - cosine_sim, in [0, 2]. Exactly symmetric in its arguments.
double cosine_dist(const Embedding& a, const Embedding& b);

namespace detail {
// Raw dot product with 64-bit accumulation, no clamping.
double dot_f64(std::span<const float> a, std::span<const float> b);
}  // namespace detail

}  // namespace setret
