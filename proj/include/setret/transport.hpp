#pragma once

#include <cstddef>
#include <vector>

#include "setret/embedding.hpp"
#include "setret/transition.hpp"

namespace setret {

// M target-side embeddings with uniform mass 1/M: the original target
// embedding first, followed by the augmentation embeddings.
struct TargetDistribution {
  std::vector<Embedding> points;

  std::size_t size() const { return points.size(); }
  std::size_t dim() const { return points.empty() ? 0 : points.front().dim(); }

  static TargetDistribution from(std::vector<Embedding> pts);
};

// K x M cosine distances, row-major. Entries live in [0, 2].
struct CostMatrix {
  std::vector<double> values;
  std::size_t k_dim = 0;
  std::size_t m_dim = 0;

  double at(std::size_t k, std::size_t m) const { return values[k * m_dim + m]; }
};

// Row-stochastic softmax plans for both directions. `forward` is K x M
// (caption k -> target points), `backward` is M x K (target point m ->
// captions), both row-major.
struct TransportPlan {
  std::vector<double> forward;
  std::vector<double> backward;
  std::size_t k_dim = 0;
  std::size_t m_dim = 0;
  double tau = 0.0;

  double forward_at(std::size_t k, std::size_t m) const { return forward[k * m_dim + m]; }
  double backward_at(std::size_t m, std::size_t k) const { return backward[m * k_dim + k]; }
};

struct TransportResult {
  CostMatrix cost;
  TransportPlan plan;
  double forward_cost = 0.0;
  double backward_cost = 0.0;
  double l_bi = 0.0;
};

struct SinkhornResult {
  double cost = 0.0;
  std::vector<double> plan;  // K x M row-major coupling, marginals 1/K and 1/M
  std::size_t k_dim = 0;
  std::size_t m_dim = 0;
  int iters_used = 0;
  bool converged = false;
  double marginal_error = 0.0;
};

// c[k][m] = 1 - <t_k, y_m>.
CostMatrix cost_matrix(const CaptionDistribution& p, const TargetDistribution& q);

// Bidirectional conditional-transport distance. Both plans are softmax
// functions of pairwise similarity at temperature tau, with per-row max
// subtraction. By default the two transport costs are expectations
// ((1/K) and (1/M) prefactors) so l_bi is scale-free in K and M;
// raw_sum drops the prefactors for plain-sum arithmetic.
TransportResult ct_distance(const CaptionDistribution& p, const TargetDistribution& q,
                            double tau, bool raw_sum = false);

// Reusable buffers for scoring many candidates against one query without
// re-allocating. ct_lbi performs the same arithmetic as ct_distance and
// returns bitwise-identical l_bi values.
struct CtScratch {
  std::vector<double> sim;
  std::vector<double> row;
};

double ct_lbi(const CaptionDistribution& p, const TargetDistribution& q, double tau,
              bool raw_sum, CtScratch& scratch);

// Entropic optimal transport with uniform marginals (1/K, 1/M), solved by
// log-domain Sinkhorn iterations. Non-convergence within max_iters is
// reported through the `converged` flag, not as an error.
SinkhornResult sinkhorn_ot(const CaptionDistribution& p, const TargetDistribution& q,
                           double epsilon, int max_iters = 1000, double tol = 1e-6);

// Point-to-point baseline: cosine distance between the normalized means of
// the two point sets.
double mean_cosine_distance(const CaptionDistribution& p, const TargetDistribution& q);

}  // namespace setret
