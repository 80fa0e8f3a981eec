#include "setret/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace setret {

namespace {

double naive_cost(const Embedding& a, const Embedding& b) {
  double dot = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) {
    dot += static_cast<double>(a.values[i]) * static_cast<double>(b.values[i]);
  }
  if (dot > 1.0) dot = 1.0;
  if (dot < -1.0) dot = -1.0;
  return 1.0 - dot;
}

}  // namespace

double ct_oracle(const CaptionDistribution& p, const TargetDistribution& q, double tau,
                 bool raw_sum) {
  if (p.points.empty()) raise(ErrorCode::EmptyCaptionSet, "empty caption distribution");
  if (q.points.empty()) raise(ErrorCode::EmptyTargetSet, "empty target distribution");
  if (p.dim() != q.dim()) raise(ErrorCode::DimMismatch, "oracle dim mismatch");
  if (!(tau > 0.0)) raise(ErrorCode::NonPositiveTau, "tau must be positive");

  const std::size_t K = p.size();
  const std::size_t M = q.size();

  std::vector<std::vector<double>> c(K, std::vector<double>(M));
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t m = 0; m < M; ++m) {
      c[k][m] = naive_cost(p.points[k], q.points[m]);
    }
  }

  double forward = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    double mx = 1.0 - c[k][0];
    for (std::size_t m = 1; m < M; ++m) mx = std::max(mx, 1.0 - c[k][m]);
    double z = 0.0;
    for (std::size_t m = 0; m < M; ++m) z += std::exp(((1.0 - c[k][m]) - mx) / tau);
    for (std::size_t m = 0; m < M; ++m) {
      forward += std::exp(((1.0 - c[k][m]) - mx) / tau) / z * c[k][m];
    }
  }

  double backward = 0.0;
  for (std::size_t m = 0; m < M; ++m) {
    double mx = 1.0 - c[0][m];
    for (std::size_t k = 1; k < K; ++k) mx = std::max(mx, 1.0 - c[k][m]);
    double z = 0.0;
    for (std::size_t k = 0; k < K; ++k) z += std::exp(((1.0 - c[k][m]) - mx) / tau);
    for (std::size_t k = 0; k < K; ++k) {
      backward += std::exp(((1.0 - c[k][m]) - mx) / tau) / z * c[k][m];
    }
  }

  if (raw_sum) return forward + backward;
  return forward / static_cast<double>(K) + backward / static_cast<double>(M);
}

double ot_oracle_exact(const CaptionDistribution& p, const TargetDistribution& q) {
  if (p.points.empty()) raise(ErrorCode::EmptyCaptionSet, "empty caption distribution");
  if (q.points.empty()) raise(ErrorCode::EmptyTargetSet, "empty target distribution");
  if (p.dim() != q.dim()) raise(ErrorCode::DimMismatch, "oracle dim mismatch");

  const std::size_t K = p.size();
  const std::size_t M = q.size();
  if (K != M || K > 8) {
    raise(ErrorCode::TooLargeForExactOT,
          "exact OT enumeration requires square instances with K <= 8");
  }

  std::vector<std::vector<double>> c(K, std::vector<double>(M));
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t m = 0; m < M; ++m) {
      c[k][m] = naive_cost(p.points[k], q.points[m]);
    }
  }

  std::vector<std::size_t> perm(K);
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (std::size_t k = 0; k < K; ++k) total += c[k][perm[k]];
    best = std::min(best, total);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best / static_cast<double>(K);
}

}  // namespace setret
