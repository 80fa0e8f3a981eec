#pragma once

#include <optional>
#include <vector>

#include "setret/embedding.hpp"

namespace setret {

// The modification-text embedding. It estimates the semantic shift from the
// reference toward the target, so blending it into a caption embedding moves
// the caption in the direction the modification text asks for.
struct TransitionVector {
  Embedding delta;

  static TransitionVector from(Embedding e);
};

// K caption embeddings with uniform mass 1/K. `fused` records whether the
// transition blend was applied; `blend_norms` keeps the pre-normalization
// norm of each blend for diagnostics (empty when not fused).
struct CaptionDistribution {
  std::vector<Embedding> points;
  bool fused = false;
  double alpha = 0.0;
  std::vector<double> blend_norms;

  std::size_t size() const { return points.size(); }
  std::size_t dim() const { return points.empty() ? 0 : points.front().dim(); }
};

// out = normalize((1 - alpha) * caption + alpha * delta).
// Re-normalization of the blend is the default; it can be switched off for
// ablation, in which case the raw blend is returned as-is. An antipodal blend that collapses to (near) zero is a hard error.
// If `blend_norm_out` is non-null it receives the pre-normalization norm.
Embedding apply_transition(const Embedding& caption, const TransitionVector& delta,
                           double alpha, bool renormalize = true,
                           double* blend_norm_out = nullptr);

// Builds the caption distribution, applying the transition to every point
// when `delta` is present. Input order is preserved.
CaptionDistribution build_caption_distribution(
    const std::vector<Embedding>& captions,
    const std::optional<TransitionVector>& delta, double alpha,
    bool renormalize = true);

}  // namespace setret
