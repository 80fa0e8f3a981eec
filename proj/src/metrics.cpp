#include "setret/metrics.hpp"

#include <algorithm>
#include <unordered_set>

#include "setret/error.hpp"

namespace setret {

namespace {

using TruthMap = std::unordered_map<std::string, std::unordered_set<std::string>>;

TruthMap index_truth(const std::vector<GroundTruth>& truth) {
  TruthMap map;
  for (const auto& gt : truth) {
    map[gt.query_id].insert(gt.positives.begin(), gt.positives.end());
  }
  return map;
}

// Validates one ranking against k and returns how many entries to examine.
// A ranking shorter than k is fine only when it covers its whole pool.
std::size_t effective_k(const Ranking& r, std::size_t k) {
  if (r.entries.empty()) {
    raise(ErrorCode::EmptyRanking, "query " + r.query_id + " has no scored candidates");
  }
  if (r.entries.size() < k && r.entries.size() < r.pool_size) {
    raise(ErrorCode::KExceedsPool,
          "query " + r.query_id + " kept only " + std::to_string(r.entries.size()) +
              " of " + std::to_string(r.pool_size) + " candidates, need top-" +
              std::to_string(k));
  }
  return std::min(k, r.entries.size());
}

const std::unordered_set<std::string>& positives_for(const TruthMap& map,
                                                     const std::string& query_id) {
  const auto it = map.find(query_id);
  if (it == map.end()) {
    raise(ErrorCode::MissingTruth, "no ground truth for query " + query_id);
  }
  return it->second;
}

void check_nonempty(const std::vector<Ranking>& rankings, std::size_t k) {
  if (k < 1) raise(ErrorCode::InvalidArgument, "k must be >= 1");
  if (rankings.empty()) {
    raise(ErrorCode::InvalidArgument, "no rankings to evaluate");
  }
}

}  // namespace

MetricReport recall_at_k(const std::vector<Ranking>& rankings,
                         const std::vector<GroundTruth>& truth, std::size_t k) {
  check_nonempty(rankings, k);
  const TruthMap map = index_truth(truth);

  double hits = 0.0;
  for (const auto& r : rankings) {
    const auto& pos = positives_for(map, r.query_id);
    const std::size_t top = effective_k(r, k);
    for (std::size_t i = 0; i < top; ++i) {
      if (pos.contains(r.entries[i].candidate_id)) {
        hits += 1.0;
        break;
      }
    }
  }
  return {"recall@" + std::to_string(k), k, hits / static_cast<double>(rankings.size()),
          rankings.size()};
}

MetricReport map_at_k(const std::vector<Ranking>& rankings,
                      const std::vector<GroundTruth>& truth, std::size_t k) {
  check_nonempty(rankings, k);
  const TruthMap map = index_truth(truth);

  double total = 0.0;
  for (const auto& r : rankings) {
    const auto& pos = positives_for(map, r.query_id);
    const std::size_t top = effective_k(r, k);
    double ap = 0.0;
    std::size_t found = 0;
    for (std::size_t i = 0; i < top; ++i) {
      if (pos.contains(r.entries[i].candidate_id)) {
        ++found;
        ap += static_cast<double>(found) / static_cast<double>(i + 1);
      }
    }
    const std::size_t denom = std::min(pos.size(), k);
    total += ap / static_cast<double>(denom);
  }
  return {"map@" + std::to_string(k), k, total / static_cast<double>(rankings.size()),
          rankings.size()};
}

MetricReport subset_recall_at_k(
    const std::vector<Ranking>& rankings, const std::vector<GroundTruth>& truth,
    std::size_t k,
    const std::unordered_map<std::string, std::vector<std::string>>& subsets) {
  check_nonempty(rankings, k);
  const TruthMap map = index_truth(truth);

  for (const auto& r : rankings) {
    const auto& pos = positives_for(map, r.query_id);
    const auto sub_it = subsets.find(r.query_id);
    if (sub_it == subsets.end()) {
      raise(ErrorCode::MissingTruth,
            "query " + r.query_id + " has no recorded subset restriction");
    }
    const std::unordered_set<std::string> sub(sub_it->second.begin(),
                                              sub_it->second.end());
    for (const auto& p : pos) {
      if (!sub.contains(p)) {
        raise(ErrorCode::MissingTruth,
              "query " + r.query_id + " positive \"" + p + "\" is outside its subset");
      }
    }
  }

  MetricReport report = recall_at_k(rankings, truth, k);
  report.metric = "subset_recall@" + std::to_string(k);
  return report;
}

}  // namespace setret
