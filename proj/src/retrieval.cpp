#include "setret/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numeric>
#include <thread>

#include "setret/store.hpp"

namespace setret {

const char* score_mode_name(ScoreMode mode) {
  switch (mode) {
    case ScoreMode::kCt: return "ct";
    case ScoreMode::kOt: return "ot";
    case ScoreMode::kCosineMean: return "cosine_mean";
  }
  return "?";
}

ScoreMode parse_score_mode(const std::string& name) {
  if (name == "ct") return ScoreMode::kCt;
  if (name == "ot") return ScoreMode::kOt;
  if (name == "cosine_mean") return ScoreMode::kCosineMean;
  raise(ErrorCode::InvalidArgument,
        "unknown mode \"" + name + "\" (expected ct, ot, or cosine_mean)");
}

namespace {

CaptionDistribution prepare_captions(const QueryRecord& query, const ScoringConfig& cfg) {
  if (cfg.use_transition && !query.delta.has_value()) {
    raise(ErrorCode::MissingDelta,
          "query " + query.id + " has no transition vector but use_transition is on");
  }
  const std::optional<TransitionVector> delta =
      cfg.use_transition ? query.delta : std::nullopt;
  return build_caption_distribution(query.captions, delta, cfg.alpha);
}

double score_prepared(const CaptionDistribution& p, const TargetDistribution& candidate,
                      const ScoringConfig& cfg, CtScratch& scratch) {
  switch (cfg.mode) {
    case ScoreMode::kCt:
      return ct_lbi(p, candidate, cfg.tau, cfg.raw_sum_lbi, scratch);
    case ScoreMode::kOt:
      return sinkhorn_ot(p, candidate, cfg.sinkhorn.epsilon, cfg.sinkhorn.max_iters,
                         cfg.sinkhorn.tol)
          .cost;
    case ScoreMode::kCosineMean:
      return mean_cosine_distance(p, candidate);
  }
  raise(ErrorCode::InvalidArgument, "unhandled scoring mode");
}

}  // namespace

double score_candidate(const QueryRecord& query, const TargetDistribution& candidate,
                       const ScoringConfig& cfg) {
  const CaptionDistribution p = prepare_captions(query, cfg);
  CtScratch scratch;
  return score_prepared(p, candidate, cfg, scratch);
}

Ranking retrieve(const QueryRecord& query, const CandidateDatabase& db,
                 const ScoringConfig& cfg, std::size_t k, unsigned workers) {
  if (k < 1) raise(ErrorCode::InvalidArgument, "k must be >= 1");
  if (!(cfg.score_temperature > 0.0)) {
    raise(ErrorCode::InvalidArgument, "score temperature must be positive");
  }
  if (db.size() == 0) raise(ErrorCode::EmptyDatabase, "candidate database is empty");

  std::vector<std::size_t> pool;
  if (query.subset.has_value()) {
    pool.reserve(query.subset->size());
    for (const auto& id : *query.subset) {
      const auto it = db.index.find(id);
      if (it == db.index.end()) {
        raise(ErrorCode::UnknownSubsetId,
              "query " + query.id + " restricts to unknown candidate \"" + id + "\"");
      }
      pool.push_back(it->second);
    }
    if (pool.empty()) {
      raise(ErrorCode::EmptyDatabase, "query " + query.id + " has an empty subset");
    }
  } else {
    pool.resize(db.size());
    std::iota(pool.begin(), pool.end(), std::size_t{0});
  }

  const CaptionDistribution p = prepare_captions(query, cfg);
  const std::size_t n = pool.size();
  std::vector<double> dist(n);

  // Parallelism is across candidates only; each candidate's score is a
  // fixed-order reduction, so results are identical for any worker count.
  auto run_range = [&](std::size_t begin, std::size_t end) {
    CtScratch scratch;
    for (std::size_t i = begin; i < end; ++i) {
      dist[i] = score_prepared(p, db.sets[pool[i]], cfg, scratch);
    }
  };

  const unsigned n_workers =
      std::min<unsigned>(std::max(1u, workers), static_cast<unsigned>(n));
  if (n_workers <= 1) {
    run_range(0, n);
  } else {
    std::vector<std::thread> threads;
    std::exception_ptr first_error;
    std::mutex error_mutex;
    const std::size_t chunk = (n + n_workers - 1) / n_workers;
    for (unsigned w = 0; w < n_workers; ++w) {
      const std::size_t begin = w * chunk;
      const std::size_t end = std::min(n, begin + chunk);
      if (begin >= end) break;
      threads.emplace_back([&, begin, end] {
        try {
          run_range(begin, end);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      });
    }
    for (auto& t : threads) t.join();
    if (first_error) std::rethrow_exception(first_error);
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (dist[a] != dist[b]) return dist[a] < dist[b];
    return db.ids[pool[a]] < db.ids[pool[b]];
  });

  // Softmax over the negated distances of the whole scored pool.
  const double inv_t = 1.0 / cfg.score_temperature;
  const double best = dist[order.front()];
  double z = 0.0;
  std::vector<double> unnorm(n);
  for (std::size_t i = 0; i < n; ++i) {
    unnorm[i] = std::exp((best - dist[i]) * inv_t);
    z += unnorm[i];
  }

  Ranking out;
  out.query_id = query.id;
  out.truncated_at = k;
  out.pool_size = n;
  const std::size_t take = std::min(k, n);
  out.entries.reserve(take);
  for (std::size_t r = 0; r < take; ++r) {
    const std::size_t i = order[r];
    out.entries.push_back({db.ids[pool[i]], dist[i], unnorm[i] / z});
  }

  for (std::size_t r = 1; r < out.entries.size(); ++r) {
    const auto& prev = out.entries[r - 1];
    const auto& cur = out.entries[r];
    if (prev.distance > cur.distance || prev.score < cur.score) {
      raise(ErrorCode::InvalidArgument,
            "internal: ranking order and score order disagree for query " + query.id);
    }
  }
  return out;
}

}  // namespace setret
