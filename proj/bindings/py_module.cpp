// Python surface for the set-to-set retrieval core. Point sets cross the
// boundary as nested lists of floats and are L2-normalized on the way in,
// matching the pipeline's storage policy (normalize is bitwise idempotent
// on unit inputs). Library errors surface as setret.Error with the
// machine-readable code name prefixed to the message.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <algorithm>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "setret/metrics.hpp"
#include "setret/oracles.hpp"
#include "setret/retrieval.hpp"
#include "setret/store.hpp"
#include "setret/synth.hpp"

namespace py = pybind11;
using namespace setret;

namespace {

using Rows = std::vector<std::vector<float>>;
using TruthMap = std::unordered_map<std::string, std::vector<std::string>>;

std::vector<Embedding> to_points(const Rows& rows) {
  std::vector<Embedding> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(normalize(r));
  return out;
}

CaptionDistribution to_captions(const Rows& rows) {
  CaptionDistribution p;
  p.points = to_points(rows);
  return p;
}

TargetDistribution to_target(const Rows& rows) {
  return TargetDistribution::from(to_points(rows));
}

Rows from_points(const std::vector<Embedding>& pts) {
  Rows out;
  out.reserve(pts.size());
  for (const auto& p : pts) out.push_back(p.values);
  return out;
}

std::vector<std::vector<double>> matrix_rows(const std::vector<double>& flat,
                                             std::size_t n_rows, std::size_t n_cols) {
  std::vector<std::vector<double>> out(n_rows);
  for (std::size_t i = 0; i < n_rows; ++i) {
    out[i].assign(flat.begin() + i * n_cols, flat.begin() + (i + 1) * n_cols);
  }
  return out;
}

std::vector<GroundTruth> to_truth(const TruthMap& truth) {
  std::vector<std::string> keys;
  keys.reserve(truth.size());
  for (const auto& [qid, _] : truth) keys.push_back(qid);
  std::sort(keys.begin(), keys.end());
  std::vector<GroundTruth> out;
  out.reserve(keys.size());
  for (const auto& qid : keys) out.push_back({qid, truth.at(qid)});
  return out;
}

TruthMap from_truth(const std::vector<GroundTruth>& truth) {
  TruthMap out;
  for (const auto& g : truth) out[g.query_id] = g.positives;
  return out;
}

std::optional<TransitionVector> to_delta(const std::optional<std::vector<float>>& v) {
  if (!v) return std::nullopt;
  return TransitionVector::from(normalize(*v));
}

}  // namespace

PYBIND11_MODULE(_setret, m) {
  m.doc() =
      "Set-to-set embedding retrieval: transition-fused caption sets scored "
      "against candidate sets with a bidirectional conditional-transport "
      "distance, plus Sinkhorn OT and mean-cosine comparators, ranking "
      "metrics, binary banks, and a planted-target synthetic harness.";
  m.attr("__version__") = "0.1.0";

  static py::exception<Error> py_error(m, "Error");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      const std::string msg = std::string(e.code_name()) + ": " + e.what();
      PyErr_SetString(py_error.ptr(), msg.c_str());
    }
  });

  py::class_<ScoringConfig>(m, "ScoringConfig",
                            "How a query is scored against one candidate set.")
      .def(py::init([](const std::string& mode, double alpha, double tau,
                       bool use_transition, bool raw_sum_lbi, double score_temperature,
                       double sinkhorn_epsilon, int sinkhorn_max_iters,
                       double sinkhorn_tol) {
             ScoringConfig cfg;
             cfg.mode = parse_score_mode(mode);
             cfg.alpha = alpha;
             cfg.tau = tau;
             cfg.use_transition = use_transition;
             cfg.raw_sum_lbi = raw_sum_lbi;
             cfg.score_temperature = score_temperature;
             cfg.sinkhorn.epsilon = sinkhorn_epsilon;
             cfg.sinkhorn.max_iters = sinkhorn_max_iters;
             cfg.sinkhorn.tol = sinkhorn_tol;
             return cfg;
           }),
           py::arg("mode") = "ct", py::arg("alpha") = 0.45, py::arg("tau") = 0.1,
           py::arg("use_transition") = true, py::arg("raw_sum_lbi") = false,
           py::arg("score_temperature") = 1.0, py::arg("sinkhorn_epsilon") = 0.05,
           py::arg("sinkhorn_max_iters") = 1000, py::arg("sinkhorn_tol") = 1e-6)
      .def_property(
          "mode",
          [](const ScoringConfig& c) { return std::string(score_mode_name(c.mode)); },
          [](ScoringConfig& c, const std::string& s) { c.mode = parse_score_mode(s); })
      .def_readwrite("alpha", &ScoringConfig::alpha)
      .def_readwrite("tau", &ScoringConfig::tau)
      .def_readwrite("use_transition", &ScoringConfig::use_transition)
      .def_readwrite("raw_sum_lbi", &ScoringConfig::raw_sum_lbi)
      .def_readwrite("score_temperature", &ScoringConfig::score_temperature)
      .def_property(
          "sinkhorn_epsilon", [](const ScoringConfig& c) { return c.sinkhorn.epsilon; },
          [](ScoringConfig& c, double v) { c.sinkhorn.epsilon = v; })
      .def_property(
          "sinkhorn_max_iters",
          [](const ScoringConfig& c) { return c.sinkhorn.max_iters; },
          [](ScoringConfig& c, int v) { c.sinkhorn.max_iters = v; })
      .def_property(
          "sinkhorn_tol", [](const ScoringConfig& c) { return c.sinkhorn.tol; },
          [](ScoringConfig& c, double v) { c.sinkhorn.tol = v; })
      .def("__repr__", [](const ScoringConfig& c) {
        std::ostringstream os;
        os << "ScoringConfig(mode='" << score_mode_name(c.mode) << "', alpha=" << c.alpha
           << ", tau=" << c.tau << ", use_transition="
           << (c.use_transition ? "True" : "False") << ")";
        return os.str();
      });

  py::class_<QueryRecord>(m, "QueryRecord",
                          "One query: caption embeddings plus the optional "
                          "modification-text embedding, reference embedding, and "
                          "candidate-subset restriction.")
      .def(py::init([](std::string id, const Rows& captions,
                       const std::optional<std::vector<float>>& delta,
                       const std::optional<std::vector<float>>& reference,
                       const std::optional<std::vector<std::string>>& subset) {
             QueryRecord q;
             q.id = std::move(id);
             q.captions = to_points(captions);
             q.delta = to_delta(delta);
             if (reference) q.reference = normalize(*reference);
             q.subset = subset;
             return q;
           }),
           py::arg("id"), py::arg("captions"), py::arg("delta") = py::none(),
           py::arg("reference") = py::none(), py::arg("subset") = py::none())
      .def_readwrite("id", &QueryRecord::id)
      .def_property_readonly(
          "captions", [](const QueryRecord& q) { return from_points(q.captions); })
      .def_property_readonly("delta",
                             [](const QueryRecord& q) -> std::optional<std::vector<float>> {
                               if (!q.delta) return std::nullopt;
                               return q.delta->delta.values;
                             })
      .def_property_readonly(
          "reference", [](const QueryRecord& q) -> std::optional<std::vector<float>> {
            if (!q.reference) return std::nullopt;
            return q.reference->values;
          })
      .def_readwrite("subset", &QueryRecord::subset)
      .def("__repr__", [](const QueryRecord& q) {
        std::ostringstream os;
        os << "QueryRecord(id='" << q.id << "', captions=" << q.captions.size()
           << ", delta=" << (q.delta ? "yes" : "no") << ")";
        return os.str();
      });

  py::class_<RankedEntry>(m, "RankedEntry")
      .def_readonly("candidate_id", &RankedEntry::candidate_id)
      .def_readonly("distance", &RankedEntry::distance)
      .def_readonly("score", &RankedEntry::score)
      .def("__repr__", [](const RankedEntry& e) {
        std::ostringstream os;
        os << "RankedEntry('" << e.candidate_id << "', distance=" << e.distance
           << ", score=" << e.score << ")";
        return os.str();
      });

  py::class_<Ranking>(m, "Ranking")
      .def_readonly("query_id", &Ranking::query_id)
      .def_readonly("entries", &Ranking::entries)
      .def_readonly("truncated_at", &Ranking::truncated_at)
      .def_readonly("pool_size", &Ranking::pool_size)
      .def("__len__", [](const Ranking& r) { return r.entries.size(); })
      .def("__repr__", [](const Ranking& r) {
        std::ostringstream os;
        os << "Ranking('" << r.query_id << "', entries=" << r.entries.size()
           << ", pool_size=" << r.pool_size << ")";
        return os.str();
      });

  py::class_<MetricReport>(m, "MetricReport")
      .def_readonly("metric", &MetricReport::metric)
      .def_readonly("k", &MetricReport::k)
      .def_readonly("value", &MetricReport::value)
      .def_readonly("n_queries", &MetricReport::n_queries)
      .def("__repr__", [](const MetricReport& r) {
        std::ostringstream os;
        os << "MetricReport(" << r.metric << "=" << r.value << ", n_queries="
           << r.n_queries << ")";
        return os.str();
      });

  py::class_<TransportResult>(m, "TransportResult")
      .def_readonly("forward_cost", &TransportResult::forward_cost)
      .def_readonly("backward_cost", &TransportResult::backward_cost)
      .def_readonly("l_bi", &TransportResult::l_bi)
      .def_property_readonly("cost",
                             [](const TransportResult& r) {
                               return matrix_rows(r.cost.values, r.cost.k_dim,
                                                  r.cost.m_dim);
                             })
      .def_property_readonly("forward_plan",
                             [](const TransportResult& r) {
                               return matrix_rows(r.plan.forward, r.plan.k_dim,
                                                  r.plan.m_dim);
                             })
      .def_property_readonly("backward_plan",
                             [](const TransportResult& r) {
                               return matrix_rows(r.plan.backward, r.plan.m_dim,
                                                  r.plan.k_dim);
                             })
      .def("__repr__", [](const TransportResult& r) {
        std::ostringstream os;
        os << "TransportResult(l_bi=" << r.l_bi << ", forward=" << r.forward_cost
           << ", backward=" << r.backward_cost << ")";
        return os.str();
      });

  py::class_<SinkhornResult>(m, "SinkhornResult")
      .def_readonly("cost", &SinkhornResult::cost)
      .def_readonly("iters_used", &SinkhornResult::iters_used)
      .def_readonly("converged", &SinkhornResult::converged)
      .def_readonly("marginal_error", &SinkhornResult::marginal_error)
      .def_property_readonly("plan",
                             [](const SinkhornResult& r) {
                               return matrix_rows(r.plan, r.k_dim, r.m_dim);
                             })
      .def("__repr__", [](const SinkhornResult& r) {
        std::ostringstream os;
        os << "SinkhornResult(cost=" << r.cost << ", converged="
           << (r.converged ? "True" : "False") << ", iters_used=" << r.iters_used
           << ")";
        return os.str();
      });

  py::class_<CandidateDatabase>(m, "CandidateDatabase",
                                "Candidate id -> target point set, in insertion order.")
      .def(py::init<>())
      .def(
          "add",
          [](CandidateDatabase& db, std::string id, const Rows& points) {
            db.add(std::move(id), to_target(points));
          },
          py::arg("id"), py::arg("points"))
      .def("__len__", &CandidateDatabase::size)
      .def_readonly("dim", &CandidateDatabase::dim)
      .def_readonly("ids", &CandidateDatabase::ids)
      .def_property_readonly(
          "meta", [](const CandidateDatabase& db) { return db.manifest_meta; })
      .def(
          "points",
          [](const CandidateDatabase& db, const std::string& id) {
            const auto it = db.index.find(id);
            if (it == db.index.end()) {
              raise(ErrorCode::InvalidArgument, "unknown candidate id: " + id);
            }
            return from_points(db.sets[it->second].points);
          },
          py::arg("id"))
      .def("__repr__", [](const CandidateDatabase& db) {
        std::ostringstream os;
        os << "CandidateDatabase(size=" << db.size() << ", dim=" << db.dim << ")";
        return os.str();
      });

  py::class_<SynthParams>(m, "SynthParams",
                          "Knobs for the planted-target synthetic instance generator.")
      .def(py::init([](std::uint64_t seed, std::size_t d, std::size_t n_candidates,
                       std::size_t n_queries, std::size_t k_captions,
                       std::size_t m_augmentations, double beta, double caption_noise,
                       double leak, double aug_noise, std::size_t n_aspects,
                       double aspect_scale, bool include_reference, double decoy_beta,
                       bool include_twin, std::size_t extra_positives) {
             SynthParams p;
             p.seed = seed;
             p.d = d;
             p.n_candidates = n_candidates;
             p.n_queries = n_queries;
             p.k_captions = k_captions;
             p.m_augmentations = m_augmentations;
             p.beta = beta;
             p.caption_noise = caption_noise;
             p.leak = leak;
             p.aug_noise = aug_noise;
             p.n_aspects = n_aspects;
             p.aspect_scale = aspect_scale;
             p.include_reference = include_reference;
             p.decoy_beta = decoy_beta;
             p.include_twin = include_twin;
             p.extra_positives = extra_positives;
             return p;
           }),
           py::arg("seed") = 7, py::arg("d") = 32, py::arg("n_candidates") = 100,
           py::arg("n_queries") = 200, py::arg("k_captions") = 5,
           py::arg("m_augmentations") = 10, py::arg("beta") = 1.0,
           py::arg("caption_noise") = 0.1, py::arg("leak") = 0.8,
           py::arg("aug_noise") = 0.1, py::arg("n_aspects") = 3,
           py::arg("aspect_scale") = 1.4, py::arg("include_reference") = true,
           py::arg("decoy_beta") = 0.5, py::arg("include_twin") = true,
           py::arg("extra_positives") = 0)
      .def_readwrite("seed", &SynthParams::seed)
      .def_readwrite("d", &SynthParams::d)
      .def_readwrite("n_candidates", &SynthParams::n_candidates)
      .def_readwrite("n_queries", &SynthParams::n_queries)
      .def_readwrite("k_captions", &SynthParams::k_captions)
      .def_readwrite("m_augmentations", &SynthParams::m_augmentations)
      .def_readwrite("beta", &SynthParams::beta)
      .def_readwrite("caption_noise", &SynthParams::caption_noise)
      .def_readwrite("leak", &SynthParams::leak)
      .def_readwrite("aug_noise", &SynthParams::aug_noise)
      .def_readwrite("n_aspects", &SynthParams::n_aspects)
      .def_readwrite("aspect_scale", &SynthParams::aspect_scale)
      .def_readwrite("include_reference", &SynthParams::include_reference)
      .def_readwrite("decoy_beta", &SynthParams::decoy_beta)
      .def_readwrite("include_twin", &SynthParams::include_twin)
      .def_readwrite("extra_positives", &SynthParams::extra_positives)
      .def("__repr__", [](const SynthParams& p) {
        std::ostringstream os;
        os << "SynthParams(seed=" << p.seed << ", d=" << p.d << ", n_candidates="
           << p.n_candidates << ", n_queries=" << p.n_queries << ")";
        return os.str();
      });

  py::class_<SynthInstance>(m, "SynthInstance")
      .def_readonly("params", &SynthInstance::params)
      .def_readonly("queries", &SynthInstance::queries)
      .def_readonly("db", &SynthInstance::db)
      .def_property_readonly(
          "truth", [](const SynthInstance& s) { return from_truth(s.truth); })
      .def("__repr__", [](const SynthInstance& s) {
        std::ostringstream os;
        os << "SynthInstance(queries=" << s.queries.size() << ", candidates="
           << s.db.size() << ")";
        return os.str();
      });

  // Embedding-level operations. Raw inputs are normalized first.
  m.def(
      "normalize", [](const std::vector<float>& v) { return normalize(v).values; },
      py::arg("v"), "Scale to unit L2 norm (bitwise pass-through for unit inputs).");
  m.def(
      "cosine_sim",
      [](const std::vector<float>& a, const std::vector<float>& b) {
        return cosine_sim(normalize(a), normalize(b));
      },
      py::arg("a"), py::arg("b"));
  m.def(
      "cosine_dist",
      [](const std::vector<float>& a, const std::vector<float>& b) {
        return cosine_dist(normalize(a), normalize(b));
      },
      py::arg("a"), py::arg("b"));
  m.def(
      "apply_transition",
      [](const std::vector<float>& caption, const std::vector<float>& delta,
         double alpha, bool renormalize) {
        return apply_transition(normalize(caption),
                                TransitionVector::from(normalize(delta)), alpha,
                                renormalize)
            .values;
      },
      py::arg("caption"), py::arg("delta"), py::arg("alpha"),
      py::arg("renormalize") = true,
      "normalize((1-alpha)*caption + alpha*delta), the semantic-shift blend.");
  m.def(
      "fuse_captions",
      [](const Rows& captions, const std::optional<std::vector<float>>& delta,
         double alpha, bool renormalize) {
        return from_points(
            build_caption_distribution(to_points(captions), to_delta(delta), alpha,
                                       renormalize)
                .points);
      },
      py::arg("captions"), py::arg("delta") = py::none(), py::arg("alpha") = 0.45,
      py::arg("renormalize") = true,
      "Apply the transition blend to every caption (pass-through when delta is None).");

  // Set-to-set distances.
  m.def(
      "ct_distance",
      [](const Rows& captions, const Rows& targets, double tau, bool raw_sum) {
        return ct_distance(to_captions(captions), to_target(targets), tau, raw_sum);
      },
      py::arg("captions"), py::arg("targets"), py::arg("tau") = 0.1,
      py::arg("raw_sum") = false,
      "Bidirectional conditional-transport distance with softmax plans.");
  m.def(
      "ct_lbi",
      [](const Rows& captions, const Rows& targets, double tau, bool raw_sum) {
        CtScratch scratch;
        return ct_lbi(to_captions(captions), to_target(targets), tau, raw_sum, scratch);
      },
      py::arg("captions"), py::arg("targets"), py::arg("tau") = 0.1,
      py::arg("raw_sum") = false, "l_bi only; bitwise-identical to ct_distance().l_bi.");
  m.def(
      "sinkhorn_ot",
      [](const Rows& captions, const Rows& targets, double epsilon, int max_iters,
         double tol) {
        return sinkhorn_ot(to_captions(captions), to_target(targets), epsilon,
                           max_iters, tol);
      },
      py::arg("captions"), py::arg("targets"), py::arg("epsilon") = 0.05,
      py::arg("max_iters") = 1000, py::arg("tol") = 1e-6,
      py::call_guard<py::gil_scoped_release>(),
      "Entropic OT with uniform marginals via log-domain Sinkhorn iterations.");
  m.def(
      "mean_cosine_distance",
      [](const Rows& captions, const Rows& targets) {
        return mean_cosine_distance(to_captions(captions), to_target(targets));
      },
      py::arg("captions"), py::arg("targets"),
      "Cosine distance between the normalized set means (pooled baseline).");

  // Scoring and retrieval.
  m.def(
      "score_candidate",
      [](const QueryRecord& query, const Rows& candidate, const ScoringConfig& cfg) {
        return score_candidate(query, to_target(candidate), cfg);
      },
      py::arg("query"), py::arg("candidate"), py::arg("config") = ScoringConfig{},
      "Distance between one query and one candidate point set under the config.");
  m.def("retrieve", &retrieve, py::arg("query"), py::arg("db"),
        py::arg("config") = ScoringConfig{}, py::arg("k") = 10, py::arg("workers") = 1,
        py::call_guard<py::gil_scoped_release>(),
        "Score every candidate (or the query's subset) and return the top-k ranking.");

  // Metrics. `truth` maps query_id -> list of positive candidate ids.
  m.def(
      "recall_at_k",
      [](const std::vector<Ranking>& rankings, const TruthMap& truth, std::size_t k) {
        return recall_at_k(rankings, to_truth(truth), k);
      },
      py::arg("rankings"), py::arg("truth"), py::arg("k"));
  m.def(
      "map_at_k",
      [](const std::vector<Ranking>& rankings, const TruthMap& truth, std::size_t k) {
        return map_at_k(rankings, to_truth(truth), k);
      },
      py::arg("rankings"), py::arg("truth"), py::arg("k"));
  m.def(
      "subset_recall_at_k",
      [](const std::vector<Ranking>& rankings, const TruthMap& truth, std::size_t k,
         const TruthMap& subsets) {
        return subset_recall_at_k(rankings, to_truth(truth), k, subsets);
      },
      py::arg("rankings"), py::arg("truth"), py::arg("k"), py::arg("subsets"));

  // Synthetic harness.
  m.def("generate_instance", &generate_instance, py::arg("params") = SynthParams{},
        "Deterministic planted-target instance for end-to-end evaluation.");
  m.def("write_instance", &write_instance, py::arg("instance"), py::arg("dir"),
        "Write embeddings.bank plus candidates/queries/labels manifests.");

  // Persistence.
  m.def(
      "write_bank",
      [](const std::string& path, const Rows& rows) {
        EmbeddingBank bank;
        bank.dim = rows.empty() ? 0 : static_cast<std::uint32_t>(rows.front().size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
          if (rows[i].size() != bank.dim) {
            raise(ErrorCode::InvalidArgument,
                  "ragged rows: row " + std::to_string(i) + " has " +
                      std::to_string(rows[i].size()) + " values, expected " +
                      std::to_string(bank.dim));
          }
          bank.data.insert(bank.data.end(), rows[i].begin(), rows[i].end());
        }
        write_bank(path, bank);
      },
      py::arg("path"), py::arg("rows"),
      "Write float32 rows to a binary bank (lossless).");
  m.def(
      "read_bank",
      [](const std::string& path) {
        const EmbeddingBank bank = read_bank(path);
        Rows rows;
        rows.reserve(bank.count());
        for (std::size_t i = 0; i < bank.count(); ++i) {
          const auto row = bank.row(i);
          rows.emplace_back(row.begin(), row.end());
        }
        return rows;
      },
      py::arg("path"), "Read a binary bank back as float32 rows (lossless).");
  m.def("load_database", &load_database, py::arg("manifest_path"),
        py::arg("normalize") = true);
  m.def("load_queries", &load_queries, py::arg("manifest_path"),
        py::arg("normalize") = true);
  m.def(
      "load_labels",
      [](const std::string& path) { return from_truth(load_labels(path)); },
      py::arg("manifest_path"),
      "Load ground-truth labels as a dict query_id -> positive candidate ids.");
}
