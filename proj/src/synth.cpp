#include "setret/synth.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "json.hpp"

#include "setret/rng.hpp"

namespace setret {

namespace {

std::string tagged_id(const char* prefix, std::size_t i) {
  std::ostringstream out;
  out << prefix << "_" << std::setw(4) << std::setfill('0') << i;
  return out.str();
}

void check_params(const SynthParams& p) {
  if (p.d < 2) raise(ErrorCode::InvalidArgument, "d must be >= 2");
  if (p.n_candidates < 2) raise(ErrorCode::InvalidArgument, "n_candidates must be >= 2");
  if (p.n_queries < 1) raise(ErrorCode::InvalidArgument, "n_queries must be >= 1");
  if (p.k_captions < 1) raise(ErrorCode::InvalidArgument, "k_captions must be >= 1");
  if (p.m_augmentations < 1) {
    raise(ErrorCode::InvalidArgument, "m_augmentations must be >= 1");
  }
  for (double v :
       {p.beta, p.caption_noise, p.leak, p.aug_noise, p.aspect_scale, p.decoy_beta}) {
    if (!std::isfinite(v) || v < 0.0) {
      raise(ErrorCode::InvalidArgument, "strength parameters must be finite and >= 0");
    }
  }
  if (p.beta == 0.0 && (p.leak > 0.0 || p.include_reference)) {
    raise(ErrorCode::DegenerateParams,
          "beta=0 collapses the target onto the reference; with leak or a planted "
          "reference decoy the ground truth is not identifiable");
  }
  if (p.include_reference && p.beta > 0.0 && p.decoy_beta == p.beta) {
    raise(ErrorCode::DegenerateParams,
          "decoy_beta equals beta, so the decoy coincides with the planted target");
  }
}

// Signed round-robin over (+a1, -a1, +a2, -a2, ...): slot i of a point
// sequence picks aspect (i/2 mod n) with sign flipping on odd slots.
struct AspectSlot {
  const Embedding* vec = nullptr;
  double sign = 1.0;
};

AspectSlot aspect_slot(const std::vector<Embedding>& aspects, std::size_t i) {
  if (aspects.empty()) return {};
  const std::size_t variant = i % (2 * aspects.size());
  return {&aspects[variant / 2], variant % 2 == 0 ? 1.0 : -1.0};
}

class PointSampler {
 public:
  PointSampler(Pcg32& rng, std::size_t d) : rng_(rng), d_(d), acc_(d) {}

  // normalize(base + sigma*gaussian + coeff*signed aspect); base is float32.
  Embedding noisy(std::span<const float> base, double sigma, double coeff,
                  AspectSlot slot) {
    for (std::size_t i = 0; i < d_; ++i) acc_[i] = static_cast<double>(base[i]);
    const std::vector<double> g = rng_.next_gaussian_vector(d_, sigma);
    for (std::size_t i = 0; i < d_; ++i) acc_[i] += g[i];
    if (slot.vec != nullptr && coeff != 0.0) {
      for (std::size_t i = 0; i < d_; ++i) {
        acc_[i] += slot.sign * coeff * static_cast<double>(slot.vec->values[i]);
      }
    }
    return normalize(std::span<const double>(acc_));
  }

 private:
  Pcg32& rng_;
  std::size_t d_;
  std::vector<double> acc_;
};

std::vector<Embedding> draw_aspects(Pcg32& rng, std::size_t n, std::size_t d) {
  std::vector<Embedding> aspects;
  aspects.reserve(n);
  for (std::size_t j = 0; j < n; ++j) aspects.push_back(rng.next_unit_vector(d));
  return aspects;
}

TargetDistribution candidate_set(PointSampler& sampler, std::span<const float> center,
                                 const SynthParams& p, double coeff,
                                 const std::vector<Embedding>& aspects) {
  std::vector<Embedding> pts;
  pts.reserve(p.m_augmentations);
  for (std::size_t m = 0; m < p.m_augmentations; ++m) {
    pts.push_back(sampler.noisy(center, p.aug_noise, coeff, aspect_slot(aspects, m)));
  }
  return TargetDistribution::from(std::move(pts));
}

}  // namespace

SynthInstance generate_instance(const SynthParams& params) {
  check_params(params);

  Pcg32 rng(params.seed);
  PointSampler sampler(rng, params.d);
  const double root_d = std::sqrt(static_cast<double>(params.d));
  const double cap_coeff = params.caption_noise * params.aspect_scale * root_d;
  const double aug_coeff = params.aug_noise * params.aspect_scale * root_d;

  SynthInstance instance;
  instance.params = params;

  for (std::size_t i = 0; i < params.n_candidates; ++i) {
    const Embedding center = rng.next_unit_vector(params.d);
    const auto aspects = draw_aspects(rng, params.n_aspects, params.d);
    instance.db.add(tagged_id("dist", i),
                    candidate_set(sampler, center.span(), params, aug_coeff, aspects));
  }

  for (std::size_t qi = 0; qi < params.n_queries; ++qi) {
    const Embedding x = rng.next_unit_vector(params.d);
    const Embedding mdir = rng.next_unit_vector(params.d);

    std::vector<double> y_acc(params.d);
    for (std::size_t i = 0; i < params.d; ++i) {
      y_acc[i] = static_cast<double>(x.values[i]) +
                 params.beta * static_cast<double>(mdir.values[i]);
    }
    const Embedding y = normalize(std::span<const double>(y_acc));

    const auto aspects = draw_aspects(rng, params.n_aspects, params.d);

    QueryRecord query;
    query.id = tagged_id("q", qi);
    std::vector<double> cap_acc(params.d);
    for (std::size_t k = 0; k < params.k_captions; ++k) {
      for (std::size_t i = 0; i < params.d; ++i) {
        cap_acc[i] = static_cast<double>(y.values[i]) +
                     params.leak * static_cast<double>(x.values[i]);
      }
      const std::vector<double> g =
          rng.next_gaussian_vector(params.d, params.caption_noise);
      for (std::size_t i = 0; i < params.d; ++i) cap_acc[i] += g[i];
      const AspectSlot slot = aspect_slot(aspects, k);
      if (slot.vec != nullptr && cap_coeff != 0.0) {
        for (std::size_t i = 0; i < params.d; ++i) {
          cap_acc[i] += slot.sign * cap_coeff * static_cast<double>(slot.vec->values[i]);
        }
      }
      query.captions.push_back(normalize(std::span<const double>(cap_acc)));
    }
    query.delta = TransitionVector::from(mdir);
    query.reference = x;

    GroundTruth gt;
    gt.query_id = query.id;

    const std::string target_id = tagged_id("tgt", qi);
    instance.db.add(target_id,
                    candidate_set(sampler, y.span(), params, aug_coeff, aspects));
    gt.positives.push_back(target_id);

    for (std::size_t pi = 0; pi < params.extra_positives; ++pi) {
      const std::string extra_id = target_id + "_p" + std::to_string(pi);
      instance.db.add(extra_id,
                      candidate_set(sampler, y.span(), params, aug_coeff, aspects));
      gt.positives.push_back(extra_id);
    }

    if (params.include_reference) {
      std::vector<double> dec_acc(params.d);
      for (std::size_t i = 0; i < params.d; ++i) {
        dec_acc[i] = static_cast<double>(x.values[i]) +
                     params.decoy_beta * static_cast<double>(mdir.values[i]);
      }
      const Embedding decoy_center = normalize(std::span<const double>(dec_acc));
      instance.db.add(
          tagged_id("ref", qi),
          candidate_set(sampler, decoy_center.span(), params, aug_coeff, aspects));
    }

    const bool aspects_active = params.n_aspects > 0 && params.aspect_scale > 0.0 &&
                                params.caption_noise > 0.0 && params.aug_noise > 0.0;
    if (params.include_twin && aspects_active) {
      const auto twin_aspects = draw_aspects(rng, params.n_aspects, params.d);
      instance.db.add(tagged_id("alt", qi),
                      candidate_set(sampler, y.span(), params, aug_coeff, twin_aspects));
    }

    instance.queries.push_back(std::move(query));
    instance.truth.push_back(std::move(gt));
  }

  return instance;
}

namespace {

using nlohmann::json;

json meta_line(const SynthParams& p, const char* kind) {
  json meta;
  meta["kind"] = kind;
  meta["seed"] = std::to_string(p.seed);
  meta["d"] = std::to_string(p.d);
  meta["n_candidates"] = std::to_string(p.n_candidates);
  meta["n_queries"] = std::to_string(p.n_queries);
  meta["k_captions"] = std::to_string(p.k_captions);
  meta["m_augmentations"] = std::to_string(p.m_augmentations);
  meta["beta"] = std::to_string(p.beta);
  meta["caption_noise"] = std::to_string(p.caption_noise);
  meta["leak"] = std::to_string(p.leak);
  meta["aug_noise"] = std::to_string(p.aug_noise);
  meta["n_aspects"] = std::to_string(p.n_aspects);
  meta["aspect_scale"] = std::to_string(p.aspect_scale);
  meta["include_reference"] = p.include_reference ? "true" : "false";
  meta["decoy_beta"] = std::to_string(p.decoy_beta);
  meta["include_twin"] = p.include_twin ? "true" : "false";
  meta["extra_positives"] = std::to_string(p.extra_positives);
  return json{{"meta", meta}};
}

}  // namespace

void write_instance(const SynthInstance& instance, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const std::string bank_name = "embeddings.bank";

  EmbeddingBank bank;
  bank.dim = static_cast<std::uint32_t>(instance.db.dim);
  auto push_row = [&bank](const Embedding& e) {
    const std::size_t row = bank.count();
    bank.data.insert(bank.data.end(), e.values.begin(), e.values.end());
    return row;
  };

  std::ofstream cand_out(fs::path(dir) / "candidates.jsonl");
  std::ofstream query_out(fs::path(dir) / "queries.jsonl");
  std::ofstream label_out(fs::path(dir) / "labels.jsonl");
  if (!cand_out || !query_out || !label_out) {
    raise(ErrorCode::IoError, "cannot create manifests under " + dir);
  }

  cand_out << meta_line(instance.params, "candidates") << "\n";
  for (std::size_t ci = 0; ci < instance.db.size(); ++ci) {
    json row;
    row["id"] = instance.db.ids[ci];
    row["bank"] = bank_name;
    std::vector<std::size_t> rows;
    for (const Embedding& e : instance.db.sets[ci].points) rows.push_back(push_row(e));
    row["rows"] = rows;
    cand_out << row << "\n";
  }

  query_out << meta_line(instance.params, "queries") << "\n";
  for (const QueryRecord& q : instance.queries) {
    json row;
    row["id"] = q.id;
    row["bank"] = bank_name;
    std::vector<std::size_t> rows;
    for (const Embedding& e : q.captions) rows.push_back(push_row(e));
    row["caption_rows"] = rows;
    if (q.delta.has_value()) row["delta_row"] = push_row(q.delta->delta);
    if (q.reference.has_value()) row["reference_row"] = push_row(*q.reference);
    if (q.subset.has_value()) row["subset"] = *q.subset;
    query_out << row << "\n";
  }

  for (const GroundTruth& gt : instance.truth) {
    json row;
    row["query_id"] = gt.query_id;
    row["positives"] = gt.positives;
    label_out << row << "\n";
  }

  write_bank((fs::path(dir) / bank_name).string(), bank);
}

}  // namespace setret
