#include "setret/transport.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace setret {

TargetDistribution TargetDistribution::from(std::vector<Embedding> pts) {
  if (pts.empty()) {
    raise(ErrorCode::EmptyTargetSet, "target distribution needs at least one point");
  }
  const std::size_t d = pts.front().dim();
  for (const auto& p : pts) {
    if (p.dim() != d) raise(ErrorCode::DimMismatch, "target dimensions are not uniform");
  }
  return TargetDistribution{std::move(pts)};
}

namespace {

void check_pair(const CaptionDistribution& p, const TargetDistribution& q) {
  if (p.points.empty()) raise(ErrorCode::EmptyCaptionSet, "empty caption distribution");
  if (q.points.empty()) raise(ErrorCode::EmptyTargetSet, "empty target distribution");
  if (p.dim() != q.dim()) {
    raise(ErrorCode::DimMismatch,
          "caption dim " + std::to_string(p.dim()) + " vs target dim " +
              std::to_string(q.dim()));
  }
}

// Clamped pairwise similarities, K x M row-major.
void fill_sim(const CaptionDistribution& p, const TargetDistribution& q,
              std::vector<double>& sim) {
  const std::size_t K = p.size();
  const std::size_t M = q.size();
  sim.resize(K * M);
  for (std::size_t k = 0; k < K; ++k) {
    const auto a = p.points[k].span();
    for (std::size_t m = 0; m < M; ++m) {
      sim[k * M + m] = std::clamp(detail::dot_f64(a, q.points[m].span()), -1.0, 1.0);
    }
  }
}

struct CtTotals {
  double forward = 0.0;
  double backward = 0.0;
};

// Shared core for ct_distance and ct_lbi: identical arithmetic whether or
// not the plans are materialized, so the two entry points agree bitwise.
CtTotals ct_core(const std::vector<double>& sim, std::size_t K, std::size_t M,
                 double tau, std::vector<double>& row, double* plan_fwd,
                 double* plan_bwd) {
  const double inv_tau = 1.0 / tau;
  CtTotals totals;

  row.resize(std::max(K, M));
  for (std::size_t k = 0; k < K; ++k) {
    const double* s = sim.data() + k * M;
    double mx = s[0];
    for (std::size_t m = 1; m < M; ++m) mx = std::max(mx, s[m]);
    double z = 0.0;
    for (std::size_t m = 0; m < M; ++m) {
      row[m] = std::exp((s[m] - mx) * inv_tau);
      z += row[m];
    }
    for (std::size_t m = 0; m < M; ++m) {
      const double pm = row[m] / z;
      if (plan_fwd != nullptr) plan_fwd[k * M + m] = pm;
      totals.forward += pm * (1.0 - s[m]);
    }
  }

  for (std::size_t m = 0; m < M; ++m) {
    double mx = sim[m];
    for (std::size_t k = 1; k < K; ++k) mx = std::max(mx, sim[k * M + m]);
    double z = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      row[k] = std::exp((sim[k * M + m] - mx) * inv_tau);
      z += row[k];
    }
    for (std::size_t k = 0; k < K; ++k) {
      const double pk = row[k] / z;
      if (plan_bwd != nullptr) plan_bwd[m * K + k] = pk;
      totals.backward += pk * (1.0 - sim[k * M + m]);
    }
  }
  return totals;
}

}  // namespace

CostMatrix cost_matrix(const CaptionDistribution& p, const TargetDistribution& q) {
  check_pair(p, q);
  const std::size_t K = p.size();
  const std::size_t M = q.size();
  CostMatrix c;
  c.k_dim = K;
  c.m_dim = M;
  c.values.resize(K * M);
  std::vector<double> sim;
  fill_sim(p, q, sim);
  for (std::size_t i = 0; i < K * M; ++i) c.values[i] = 1.0 - sim[i];
  return c;
}

TransportResult ct_distance(const CaptionDistribution& p, const TargetDistribution& q,
                            double tau, bool raw_sum) {
  check_pair(p, q);
  if (!(tau > 0.0)) raise(ErrorCode::NonPositiveTau, "tau must be positive");
  const std::size_t K = p.size();
  const std::size_t M = q.size();

  TransportResult result;
  std::vector<double> sim;
  fill_sim(p, q, sim);

  result.cost.k_dim = K;
  result.cost.m_dim = M;
  result.cost.values.resize(K * M);
  for (std::size_t i = 0; i < K * M; ++i) result.cost.values[i] = 1.0 - sim[i];

  result.plan.k_dim = K;
  result.plan.m_dim = M;
  result.plan.tau = tau;
  result.plan.forward.resize(K * M);
  result.plan.backward.resize(M * K);

  std::vector<double> row;
  const CtTotals totals = ct_core(sim, K, M, tau, row, result.plan.forward.data(),
                                  result.plan.backward.data());
  result.forward_cost = raw_sum ? totals.forward : totals.forward / static_cast<double>(K);
  result.backward_cost = raw_sum ? totals.backward : totals.backward / static_cast<double>(M);
  result.l_bi = result.forward_cost + result.backward_cost;
  return result;
}

double ct_lbi(const CaptionDistribution& p, const TargetDistribution& q, double tau,
              bool raw_sum, CtScratch& scratch) {
  check_pair(p, q);
  if (!(tau > 0.0)) raise(ErrorCode::NonPositiveTau, "tau must be positive");
  const std::size_t K = p.size();
  const std::size_t M = q.size();
  fill_sim(p, q, scratch.sim);
  const CtTotals totals = ct_core(scratch.sim, K, M, tau, scratch.row, nullptr, nullptr);
  const double forward = raw_sum ? totals.forward : totals.forward / static_cast<double>(K);
  const double backward = raw_sum ? totals.backward : totals.backward / static_cast<double>(M);
  return forward + backward;
}

namespace {

// log(sum_i exp(v_i)) with max subtraction.
double log_sum_exp(const std::vector<double>& v, std::size_t n) {
  double mx = v[0];
  for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, v[i]);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += std::exp(v[i] - mx);
  return mx + std::log(sum);
}

}  // namespace

SinkhornResult sinkhorn_ot(const CaptionDistribution& p, const TargetDistribution& q,
                           double epsilon, int max_iters, double tol) {
  check_pair(p, q);
  if (!(epsilon > 0.0)) raise(ErrorCode::NonPositiveEpsilon, "epsilon must be positive");
  if (max_iters < 1) raise(ErrorCode::InvalidArgument, "max_iters must be >= 1");
  if (!(tol > 0.0)) raise(ErrorCode::InvalidArgument, "tol must be positive");

  const std::size_t K = p.size();
  const std::size_t M = q.size();
  std::vector<double> sim;
  fill_sim(p, q, sim);
  std::vector<double> cost(K * M);
  for (std::size_t i = 0; i < K * M; ++i) cost[i] = 1.0 - sim[i];

  const double inv_eps = 1.0 / epsilon;
  const double log_a = -std::log(static_cast<double>(K));
  const double log_b = -std::log(static_cast<double>(M));
  const double a = 1.0 / static_cast<double>(K);
  const double b = 1.0 / static_cast<double>(M);

  std::vector<double> f(K, 0.0), g(M, 0.0);
  std::vector<double> scratch(std::max(K, M));
  std::vector<double> plan(K * M);

  SinkhornResult result;
  result.k_dim = K;
  result.m_dim = M;

  auto materialize_plan = [&]() {
    for (std::size_t i = 0; i < K; ++i) {
      for (std::size_t j = 0; j < M; ++j) {
        plan[i * M + j] = std::exp((f[i] + g[j] - cost[i * M + j]) * inv_eps);
      }
    }
  };

  auto marginal_error = [&]() {
    double row_err = 0.0;
    for (std::size_t i = 0; i < K; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < M; ++j) s += plan[i * M + j];
      row_err += std::abs(s - a);
    }
    double col_err = 0.0;
    for (std::size_t j = 0; j < M; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < K; ++i) s += plan[i * M + j];
      col_err += std::abs(s - b);
    }
    return std::max(row_err, col_err);
  };

  for (int iter = 1; iter <= max_iters; ++iter) {
    for (std::size_t i = 0; i < K; ++i) {
      for (std::size_t j = 0; j < M; ++j) {
        scratch[j] = (g[j] - cost[i * M + j]) * inv_eps;
      }
      f[i] = epsilon * (log_a - log_sum_exp(scratch, M));
    }
    for (std::size_t j = 0; j < M; ++j) {
      for (std::size_t i = 0; i < K; ++i) {
        scratch[i] = (f[i] - cost[i * M + j]) * inv_eps;
      }
      g[j] = epsilon * (log_b - log_sum_exp(scratch, K));
    }
    result.iters_used = iter;
    materialize_plan();
    result.marginal_error = marginal_error();
    if (result.marginal_error <= tol) {
      result.converged = true;
      break;
    }
  }

  double transport_cost = 0.0;
  for (std::size_t i = 0; i < K * M; ++i) transport_cost += plan[i] * cost[i];
  result.cost = transport_cost;
  result.plan = std::move(plan);
  return result;
}

double mean_cosine_distance(const CaptionDistribution& p, const TargetDistribution& q) {
  check_pair(p, q);
  const std::size_t d = p.dim();

  auto mean_of = [d](const std::vector<Embedding>& pts) {
    std::vector<double> mean(d, 0.0);
    for (const auto& e : pts) {
      for (std::size_t i = 0; i < d; ++i) mean[i] += static_cast<double>(e.values[i]);
    }
    const double inv = 1.0 / static_cast<double>(pts.size());
    for (double& x : mean) x *= inv;
    return mean;
  };

  const Embedding mp = normalize(std::span<const double>(mean_of(p.points)));
  const Embedding mq = normalize(std::span<const double>(mean_of(q.points)));
  return cosine_dist(mp, mq);
}

}  // namespace setret
