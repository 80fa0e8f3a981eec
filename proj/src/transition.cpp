#include "setret/transition.hpp"

#include <cmath>
#include <string>

namespace setret {

TransitionVector TransitionVector::from(Embedding e) {
  const double norm = l2_norm(e.span());
  if (std::abs(norm - 1.0) > kUnitNormTolerance) {
    raise(ErrorCode::InvalidArgument,
          "transition vector must be unit norm; got norm " + std::to_string(norm));
  }
  return TransitionVector{std::move(e)};
}

Embedding apply_transition(const Embedding& caption, const TransitionVector& delta,
                           double alpha, bool renormalize, double* blend_norm_out) {
  if (caption.dim() != delta.delta.dim()) {
    raise(ErrorCode::DimMismatch,
          "apply_transition: caption dim " + std::to_string(caption.dim()) +
              " vs delta dim " + std::to_string(delta.delta.dim()));
  }
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    raise(ErrorCode::AlphaOutOfRange, "alpha must lie in [0, 1]; got " + std::to_string(alpha));
  }

  const std::size_t d = caption.dim();
  std::vector<double> blend(d);
  const double w_caption = 1.0 - alpha;
  for (std::size_t i = 0; i < d; ++i) {
    blend[i] = w_caption * static_cast<double>(caption.values[i]) +
               alpha * static_cast<double>(delta.delta.values[i]);
  }

  const double norm = l2_norm(std::span<const double>(blend));
  if (blend_norm_out != nullptr) *blend_norm_out = norm;
  if (norm <= kZeroNormThreshold) {
    raise(ErrorCode::ZeroVector,
          "transition blend collapsed to zero (antipodal caption and delta)");
  }
  if (!renormalize) {
    std::vector<float> out(d);
    for (std::size_t i = 0; i < d; ++i) out[i] = static_cast<float>(blend[i]);
    return Embedding{std::move(out)};
  }
  return normalize(std::span<const double>(blend));
}

CaptionDistribution build_caption_distribution(
    const std::vector<Embedding>& captions,
    const std::optional<TransitionVector>& delta, double alpha, bool renormalize) {
  if (captions.empty()) {
    raise(ErrorCode::EmptyCaptionSet, "caption distribution needs at least one point");
  }
  const std::size_t d = captions.front().dim();
  for (const auto& c : captions) {
    if (c.dim() != d) {
      raise(ErrorCode::DimMismatch, "caption dimensions are not uniform");
    }
  }

  CaptionDistribution dist;
  dist.points.reserve(captions.size());
  if (delta.has_value()) {
    dist.fused = true;
    dist.alpha = alpha;
    dist.blend_norms.reserve(captions.size());
    for (const auto& c : captions) {
      double norm = 0.0;
      dist.points.push_back(apply_transition(c, *delta, alpha, renormalize, &norm));
      dist.blend_norms.push_back(norm);
    }
  } else {
    for (const auto& c : captions) dist.points.push_back(normalize(c.span()));
  }
  return dist;
}

}  // namespace setret
