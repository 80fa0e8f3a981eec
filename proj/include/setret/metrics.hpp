#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "setret/retrieval.hpp"

namespace setret {

struct GroundTruth {
  std::string query_id;
  std::vector<std::string> positives;
};

struct MetricReport {
  std::string metric;
  std::size_t k = 0;
  double value = 0.0;
  std::size_t n_queries = 0;
};

MetricReport recall_at_k(const std::vector<Ranking>& rankings,
                         const std::vector<GroundTruth>& truth, std::size_t k);

MetricReport map_at_k(const std::vector<Ranking>& rankings,
                      const std::vector<GroundTruth>& truth, std::size_t k);

// Recall over subset-restricted rankings. The per-query subsets are passed
// explicitly so positives can be validated against the restriction; a
// positive missing from its query's subset is a protocol violation.
MetricReport subset_recall_at_k(
    const std::vector<Ranking>& rankings, const std::vector<GroundTruth>& truth,
    std::size_t k,
    const std::unordered_map<std::string, std::vector<std::string>>& subsets);

}  // namespace setret
