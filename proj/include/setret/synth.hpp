#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "setret/metrics.hpp"
#include "setret/retrieval.hpp"
#include "setret/store.hpp"

namespace setret {

// Planted-target instance generator. Per query it samples a unit reference
// x and modification direction m, plants the target around
// y = normalize(x + beta*m), and writes captions that blend the target with
// leaked reference detail: t_k = normalize(y + caption_noise*g_k + leak*x).
//
// Three structural knobs make the instance discriminative instead of
// saturating every scorer at Recall@1 = 1:
//   - n_aspects/aspect_scale give captions and the planted candidate's
//     augmentations shared per-query signed "aspect" directions, assigned
//     round-robin over (+a1, -a1, +a2, -a2, ...). The signs cancel under
//     mean pooling but reward scorers that match individual captions to
//     individual augmentations. Aspect magnitude is proportional to the
//     corresponding noise sigma, so noise-free instances stay exactly
//     degenerate (captions equal the target center).
//   - include_reference plants a per-query decoy at
//     normalize(x + decoy_beta*m): a near-miss that kept the reference's
//     look and applied only part of the modification. It carries the
//     query's own aspect directions, so it out-scores the target for any
//     scorer that ignores the transition vector, however strong the
//     aspects are.
//   - include_twin plants a second decoy at the target center itself but
//     with unrelated aspect directions: globally identical, wrong in the
//     details. Pooled scorers see a coin flip; per-point matching still
//     finds the planted candidate. The twin is only emitted when the
//     aspect machinery is active (both noises and aspect_scale positive),
//     since without detail structure it would duplicate the target.
struct SynthParams {
  std::uint64_t seed = 7;
  std::size_t d = 32;
  std::size_t n_candidates = 100;
  std::size_t n_queries = 200;
  std::size_t k_captions = 5;
  std::size_t m_augmentations = 10;
  double beta = 1.0;
  double caption_noise = 0.1;
  double leak = 0.8;
  double aug_noise = 0.1;
  std::size_t n_aspects = 3;
  double aspect_scale = 1.4;
  bool include_reference = true;
  double decoy_beta = 0.5;
  bool include_twin = true;
  std::size_t extra_positives = 0;
};

struct SynthInstance {
  SynthParams params;
  std::vector<QueryRecord> queries;
  CandidateDatabase db;
  std::vector<GroundTruth> truth;
};

SynthInstance generate_instance(const SynthParams& params);

// Writes <dir>/embeddings.bank plus candidates/queries/labels JSONL
// manifests; loading them back reproduces the instance bitwise.
void write_instance(const SynthInstance& instance, const std::string& dir);

}  // namespace setret
