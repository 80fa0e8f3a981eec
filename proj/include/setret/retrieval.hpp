#pragma once

#include <optional>
#include <string>
#include <vector>

#include "setret/transition.hpp"
#include "setret/transport.hpp"

namespace setret {

struct QueryRecord {
  std::string id;
  std::vector<Embedding> captions;
  std::optional<TransitionVector> delta;
  std::optional<Embedding> reference;
  std::optional<std::vector<std::string>> subset;
};

enum class ScoreMode { kCt, kOt, kCosineMean };

const char* score_mode_name(ScoreMode mode);
ScoreMode parse_score_mode(const std::string& name);

struct SinkhornParams {
  double epsilon = 0.05;
  int max_iters = 1000;
  double tol = 1e-6;
};

struct ScoringConfig {
  ScoreMode mode = ScoreMode::kCt;
  double alpha = 0.45;
  double tau = 0.1;
  bool use_transition = true;
  bool raw_sum_lbi = false;
  double score_temperature = 1.0;
  SinkhornParams sinkhorn;
};

struct RankedEntry {
  std::string candidate_id;
  double distance = 0.0;
  double score = 0.0;
};

struct Ranking {
  std::string query_id;
  std::vector<RankedEntry> entries;
  std::size_t truncated_at = 0;
  // Number of candidates actually scored (database or subset size); lets
  // consumers distinguish "short because the pool is small" from truncation.
  std::size_t pool_size = 0;
};

struct CandidateDatabase;

double score_candidate(const QueryRecord& query, const TargetDistribution& candidate,
                       const ScoringConfig& cfg);

Ranking retrieve(const QueryRecord& query, const CandidateDatabase& db,
                 const ScoringConfig& cfg, std::size_t k, unsigned workers = 1);

}  // namespace setret
