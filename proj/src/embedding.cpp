#include "setret/embedding.hpp"

#include <algorithm>
#include <cmath>

namespace setret {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::AlphaOutOfRange: return "AlphaOutOfRange";
    case ErrorCode::EmptyCaptionSet: return "EmptyCaptionSet";
    case ErrorCode::EmptyTargetSet: return "EmptyTargetSet";
    case ErrorCode::NonPositiveTau: return "NonPositiveTau";
    case ErrorCode::NonPositiveEpsilon: return "NonPositiveEpsilon";
    case ErrorCode::MissingDelta: return "MissingDelta";
    case ErrorCode::EmptyDatabase: return "EmptyDatabase";
    case ErrorCode::UnknownSubsetId: return "UnknownSubsetId";
    case ErrorCode::MissingTruth: return "MissingTruth";
    case ErrorCode::KExceedsPool: return "KExceedsPool";
    case ErrorCode::EmptyRanking: return "EmptyRanking";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::UnsupportedVersion: return "UnsupportedVersion";
    case ErrorCode::TruncatedFile: return "TruncatedFile";
    case ErrorCode::DimZero: return "DimZero";
    case ErrorCode::RowOutOfRange: return "RowOutOfRange";
    case ErrorCode::DuplicateCandidateId: return "DuplicateCandidateId";
    case ErrorCode::DimMismatchAcrossBanks: return "DimMismatchAcrossBanks";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::DegenerateParams: return "DegenerateParams";
    case ErrorCode::TooLargeForExactOT: return "TooLargeForExactOT";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

double l2_norm(std::span<const float> v) {
  double sum = 0.0;
  for (float x : v) {
    const double xd = static_cast<double>(x);
    sum += xd * xd;
  }
  return std::sqrt(sum);
}

double l2_norm(std::span<const double> v) {
  double sum = 0.0;
  for (double x : v) sum += x * x;
  return std::sqrt(sum);
}

namespace {

template <typename T>
Embedding normalize_impl(std::span<const T> v) {
  if (v.empty()) raise(ErrorCode::ZeroVector, "cannot normalize an empty vector");
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(static_cast<double>(v[i]))) {
      raise(ErrorCode::NonFinite,
            "non-finite entry at index " + std::to_string(i));
    }
  }
  const double norm = l2_norm(v);
  if (norm <= kZeroNormThreshold) {
    raise(ErrorCode::ZeroVector, "vector norm below zero threshold");
  }

  std::vector<float> out(v.size());
  if (std::abs(norm - 1.0) <= kUnitNormTolerance) {
    // Already unit: pass through so normalize(normalize(v)) == normalize(v)
    // bit-for-bit.
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v[i]);
  } else {
    const double inv = 1.0 / norm;
    for (std::size_t i = 0; i < v.size(); ++i) {
      out[i] = static_cast<float>(static_cast<double>(v[i]) * inv);
    }
  }
  return Embedding{std::move(out)};
}

}  // namespace

Embedding normalize(std::span<const float> v) { return normalize_impl(v); }
Embedding normalize(std::span<const double> v) { return normalize_impl(v); }

namespace detail {

double dot_f64(std::span<const float> a, std::span<const float> b) {
  double sum = 0.0;
  const std::size_t n = a.size();
  for (std::size_t i = 0; i < n; ++i) {
    sum += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  }
  return sum;
}

}  // namespace detail

double cosine_sim(const Embedding& a, const Embedding& b) {
  if (a.dim() != b.dim()) {
    raise(ErrorCode::DimMismatch,
          "cosine_sim: dimensions " + std::to_string(a.dim()) + " vs " +
              std::to_string(b.dim()));
  }
  return std::clamp(detail::dot_f64(a.span(), b.span()), -1.0, 1.0);
}

double cosine_dist(const Embedding& a, const Embedding& b) {
  return 1.0 - cosine_sim(a, b);
}

}  // namespace setret
