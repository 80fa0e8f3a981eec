#include "setret/rng.hpp"

#include <cmath>

namespace setret {

namespace {
constexpr std::uint64_t kPcgMultiplier = 6364136223846793005ULL;
}

Pcg32::Pcg32(std::uint64_t seed, std::uint64_t stream) {
  inc_ = (stream << 1u) | 1u;
  state_ = 0u;
  next_u32();
  state_ += seed;
  next_u32();
}

std::uint32_t Pcg32::next_u32() {
  const std::uint64_t old = state_;
  state_ = old * kPcgMultiplier + inc_;
  const auto xorshifted = static_cast<std::uint32_t>(((old >> 18u) ^ old) >> 27u);
  const auto rot = static_cast<std::uint32_t>(old >> 59u);
  return (xorshifted >> rot) | (xorshifted << ((-rot) & 31u));
}

double Pcg32::next_double() {
  return (static_cast<double>(next_u32()) + 1.0) * 0x1p-32;
}

double Pcg32::next_gaussian() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = next_double();
  const double u2 = next_double();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * M_PI * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

Embedding Pcg32::next_unit_vector(std::size_t dim) {
  std::vector<double> v(dim);
  for (auto& x : v) x = next_gaussian();
  return normalize(std::span<const double>(v));
}

std::vector<double> Pcg32::next_gaussian_vector(std::size_t dim, double sigma) {
  std::vector<double> v(dim);
  for (auto& x : v) x = sigma * next_gaussian();
  return v;
}

}  // namespace setret
