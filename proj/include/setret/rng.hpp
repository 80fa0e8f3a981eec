#pragma once

#include <cstdint>
#include <vector>

#include "setret/embedding.hpp"

namespace setret {

// PCG32 (XSH-RR 64/32). Small, fast, reproducible across platforms, which
// matters more here than cryptographic strength.
class Pcg32 {
 public:
  explicit Pcg32(std::uint64_t seed, std::uint64_t stream = 0x14057b7ef767814fULL);

  std::uint32_t next_u32();

  // Uniform in (0, 1]: (u32 + 1) * 2^-32. Never returns 0, so log() is safe.
  double next_double();

  // Standard normal via Box-Muller; caches the second value of each pair.
  double next_gaussian();

  // Unit vector uniform on the sphere: normalized i.i.d. gaussians.
  Embedding next_unit_vector(std::size_t dim);

  // Gaussian vector with per-coordinate stddev sigma (not normalized).
  std::vector<double> next_gaussian_vector(std::size_t dim, double sigma);

 private:
  std::uint64_t state_;
  std::uint64_t inc_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace setret
