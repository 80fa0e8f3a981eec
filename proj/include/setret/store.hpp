#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "setret/metrics.hpp"
#include "setret/retrieval.hpp"
#include "setret/transport.hpp"

namespace setret {

// Flat float32 matrix with a tiny binary header; the on-disk layout is
// little-endian: magic "STCH", version u16 = 1, dim u32, count u64, then
// count*dim float32 values row-major. Lossless by construction.
struct EmbeddingBank {
  std::uint32_t dim = 0;
  std::vector<float> data;

  std::size_t count() const { return dim == 0 ? 0 : data.size() / dim; }
  std::span<const float> row(std::size_t i) const {
    return {data.data() + i * dim, dim};
  }
};

void write_bank(const std::string& path, const EmbeddingBank& bank);
EmbeddingBank read_bank(const std::string& path);

struct CandidateDatabase {
  std::size_t dim = 0;
  std::vector<std::string> ids;
  std::vector<TargetDistribution> sets;
  std::unordered_map<std::string, std::size_t> index;
  std::map<std::string, std::string> manifest_meta;

  std::size_t size() const { return ids.size(); }
  void add(std::string id, TargetDistribution set);
};

// Manifests are JSON Lines. An optional first line {"meta": {...}} carries
// free-form strings; every other line is one record. Bank paths are
// resolved relative to the manifest's directory.
CandidateDatabase load_database(const std::string& manifest_path, bool normalize = true);
std::vector<QueryRecord> load_queries(const std::string& manifest_path,
                                      bool normalize = true);
std::vector<GroundTruth> load_labels(const std::string& manifest_path);

}  // namespace setret
