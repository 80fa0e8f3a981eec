#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "setret/metrics.hpp"
#include "setret/retrieval.hpp"
#include "setret/rng.hpp"
#include "setret/store.hpp"
#include "setret/synth.hpp"

using nlohmann::ordered_json;
using namespace setret;

namespace {

// ---------------------------------------------------------------------------
// Output writers. Rows are flat JSON objects; `columns` fixes the order for
// the tabular formats.

std::string cell_text(const ordered_json& v) {
  if (v.is_null()) return "";
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += '"';
  return out;
}

void write_table(std::ostream& os, const std::vector<std::string>& columns,
                 const std::vector<ordered_json>& rows) {
  std::vector<std::size_t> width(columns.size());
  for (std::size_t c = 0; c < columns.size(); ++c) width[c] = columns[c].size();
  for (const ordered_json& row : rows) {
    for (std::size_t c = 0; c < columns.size(); ++c) {
      width[c] = std::max(width[c], cell_text(row.value(columns[c], ordered_json())).size());
    }
  }
  for (std::size_t c = 0; c < columns.size(); ++c) {
    os << (c ? "  " : "") << columns[c]
       << std::string(width[c] - columns[c].size(), ' ');
  }
  os << "\n";
  for (std::size_t c = 0; c < columns.size(); ++c) {
    os << (c ? "  " : "") << std::string(width[c], '-');
  }
  os << "\n";
  for (const ordered_json& row : rows) {
    for (std::size_t c = 0; c < columns.size(); ++c) {
      const std::string text = cell_text(row.value(columns[c], ordered_json()));
      os << (c ? "  " : "") << text << std::string(width[c] - text.size(), ' ');
    }
    os << "\n";
  }
}

void write_csv(std::ostream& os, const std::vector<std::string>& columns,
               const std::vector<ordered_json>& rows) {
  for (std::size_t c = 0; c < columns.size(); ++c) {
    os << (c ? "," : "") << csv_escape(columns[c]);
  }
  os << "\r\n";
  for (const ordered_json& row : rows) {
    for (std::size_t c = 0; c < columns.size(); ++c) {
      os << (c ? "," : "") << csv_escape(cell_text(row.value(columns[c], ordered_json())));
    }
    os << "\r\n";
  }
}

void write_jsonl(std::ostream& os, const std::vector<ordered_json>& rows) {
  for (const ordered_json& row : rows) os << row.dump() << "\n";
}

void emit_rows(const std::string& format, const std::string& out_path,
               const std::vector<std::string>& columns,
               const std::vector<ordered_json>& rows) {
  std::ofstream file;
  std::ostream* os = &std::cout;
  if (!out_path.empty()) {
    file.open(out_path, std::ios::binary | std::ios::trunc);
    if (!file) raise(ErrorCode::IoError, "cannot open " + out_path + " for writing");
    os = &file;
  }
  if (format == "table") write_table(*os, columns, rows);
  else if (format == "csv") write_csv(*os, columns, rows);
  else write_jsonl(*os, rows);
  if (!out_path.empty() && !file) {
    raise(ErrorCode::IoError, "short write to " + out_path);
  }
}

// ---------------------------------------------------------------------------
// Shared option bundles.

void require_file(const std::string& path) {
  if (!std::filesystem::exists(path)) {
    raise(ErrorCode::IoError, path + ": no such file");
  }
}

// Flat key=value config file; keys are long option names without the leading
// dashes. Applied after flag parsing to options the command line left unset,
// so flags always win. '#' and ';' start comments.
struct ConfigFlag {
  std::string path;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", path, "key=value config file; flags take precedence");
  }

  void apply(CLI::App* cmd) const {
    if (path.empty()) return;
    require_file(path);
    std::ifstream in(path);
    if (!in) raise(ErrorCode::IoError, "cannot open " + path);
    std::string line;
    std::size_t lineno = 0;
    const auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    while (std::getline(in, line)) {
      ++lineno;
      const std::string where = path + ":" + std::to_string(lineno);
      const auto comment = line.find_first_of("#;");
      if (comment != std::string::npos) line.erase(comment);
      const std::string text = trim(line);
      if (text.empty()) continue;
      if (text.front() == '[') {
        raise(ErrorCode::ParseError, where + ": sections are not supported, use flat key=value");
      }
      const auto eq = text.find('=');
      if (eq == std::string::npos) {
        raise(ErrorCode::ParseError, where + ": expected key=value");
      }
      const std::string key = trim(text.substr(0, eq));
      std::string value = trim(text.substr(eq + 1));
      if (value.size() >= 2 && ((value.front() == '"' && value.back() == '"') ||
                                (value.front() == '\'' && value.back() == '\''))) {
        value = value.substr(1, value.size() - 2);
      }
      CLI::Option* opt = cmd->get_option_no_throw("--" + key);
      if (opt == nullptr) {
        raise(ErrorCode::ParseError, where + ": unknown config key \"" + key + "\"");
      }
      if (opt->count() > 0) continue;
      try {
        opt->add_result(value);
        opt->run_callback();
      } catch (const CLI::Error& e) {
        raise(ErrorCode::ParseError, where + ": " + key + ": " + e.what());
      }
    }
  }
};

void check_k_list(const std::vector<std::size_t>& ks) {
  if (ks.empty()) raise(ErrorCode::InvalidArgument, "k list must be nonempty");
  if (ks.front() < 1) raise(ErrorCode::InvalidArgument, "k values must be >= 1");
  for (std::size_t i = 1; i < ks.size(); ++i) {
    if (ks[i] <= ks[i - 1]) {
      raise(ErrorCode::InvalidArgument, "k list must be strictly ascending");
    }
  }
}

struct ScoringFlags {
  std::string mode = "ct";
  ScoringConfig cfg;

  // Options shared by every scoring command. `ablate` re-exposes mode, alpha,
  // and tau as sweep lists, so those live in attach_point.
  void attach_common(CLI::App* cmd) {
    cmd->add_flag("--use-transition,!--no-transition", cfg.use_transition,
                  "Fuse the transition vector into the captions (default on)");
    cmd->add_flag("--raw-sum-lbi", cfg.raw_sum_lbi,
                  "Drop the 1/K and 1/M prefactors from the transport costs");
    cmd->add_option("--score-temperature", cfg.score_temperature,
                    "Softmax temperature for retrieval scores (> 0)")
        ->capture_default_str();
    cmd->add_option("--sinkhorn-eps", cfg.sinkhorn.epsilon,
                    "Entropic regularization for mode=ot")
        ->capture_default_str();
    cmd->add_option("--sinkhorn-iters", cfg.sinkhorn.max_iters,
                    "Sinkhorn iteration cap for mode=ot")
        ->capture_default_str();
    cmd->add_option("--sinkhorn-tol", cfg.sinkhorn.tol,
                    "Sinkhorn marginal tolerance for mode=ot")
        ->capture_default_str();
  }

  void attach_point(CLI::App* cmd) {
    cmd->add_option("--mode", mode, "Scoring mode: ct | ot | cosine_mean")
        ->check(CLI::IsMember({"ct", "ot", "cosine_mean"}))
        ->capture_default_str();
    cmd->add_option("--alpha", cfg.alpha, "Transition blend weight in [0,1]")
        ->capture_default_str();
    cmd->add_option("--tau", cfg.tau, "Transport softmax temperature (> 0)")
        ->capture_default_str();
  }

  void attach(CLI::App* cmd) {
    attach_point(cmd);
    attach_common(cmd);
  }

  ScoringConfig resolve() const {
    ScoringConfig out = cfg;
    out.mode = parse_score_mode(mode);
    return out;
  }
};

struct SynthFlags {
  SynthParams p;
  bool no_reference = false;
  bool no_twin = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--d", p.d, "Embedding dimension")->capture_default_str();
    cmd->add_option("--n-candidates", p.n_candidates, "Distractor candidate sets")
        ->capture_default_str();
    cmd->add_option("--n-queries", p.n_queries, "Query count")->capture_default_str();
    cmd->add_option("--k-captions", p.k_captions, "Captions per query")
        ->capture_default_str();
    cmd->add_option("--m-augmentations", p.m_augmentations, "Points per candidate set")
        ->capture_default_str();
    cmd->add_option("--beta", p.beta, "Modification strength")->capture_default_str();
    cmd->add_option("--caption-noise", p.caption_noise, "Caption noise sigma")
        ->capture_default_str();
    cmd->add_option("--leak", p.leak, "Reference-leak strength")->capture_default_str();
    cmd->add_option("--aug-noise", p.aug_noise, "Augmentation noise sigma")
        ->capture_default_str();
    cmd->add_option("--n-aspects", p.n_aspects, "Per-query aspect directions")
        ->capture_default_str();
    cmd->add_option("--aspect-scale", p.aspect_scale, "Aspect strength multiplier")
        ->capture_default_str();
    cmd->add_option("--decoy-beta", p.decoy_beta,
                    "Partial-modification strength of the reference decoy")
        ->capture_default_str();
    cmd->add_option("--extra-positives", p.extra_positives,
                    "Additional planted positives per query")
        ->capture_default_str();
    cmd->add_flag("--no-reference", no_reference, "Skip the reference decoy");
    cmd->add_flag("--no-twin", no_twin, "Skip the aspect-twin decoy");
  }

  SynthParams resolve(std::uint64_t seed) const {
    SynthParams out = p;
    out.seed = seed;
    out.include_reference = !no_reference;
    out.include_twin = !no_twin;
    return out;
  }
};

// ---------------------------------------------------------------------------
// Rankings JSONL.

void write_rankings(const std::string& path, const std::vector<Ranking>& rankings) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(ErrorCode::IoError, "cannot open " + path + " for writing");
  for (const Ranking& r : rankings) {
    ordered_json line;
    line["query_id"] = r.query_id;
    ordered_json ids = ordered_json::array();
    ordered_json dists = ordered_json::array();
    ordered_json scores = ordered_json::array();
    for (const RankedEntry& e : r.entries) {
      ids.push_back(e.candidate_id);
      dists.push_back(e.distance);
      scores.push_back(e.score);
    }
    line["candidates"] = std::move(ids);
    line["distances"] = std::move(dists);
    line["scores"] = std::move(scores);
    line["pool_size"] = r.pool_size;
    out << line.dump() << "\n";
  }
  if (!out) raise(ErrorCode::IoError, "short write to " + path);
}

std::vector<Ranking> read_rankings(const std::string& path) {
  require_file(path);
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorCode::IoError, "cannot open " + path);
  std::vector<Ranking> rankings;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string where = path + ":" + std::to_string(lineno);
    ordered_json j;
    try {
      j = ordered_json::parse(line);
    } catch (const std::exception& e) {
      raise(ErrorCode::ParseError, where + ": " + e.what());
    }
    try {
      Ranking r;
      r.query_id = j.at("query_id").get<std::string>();
      const auto& ids = j.at("candidates");
      const auto& dists = j.at("distances");
      const auto& scores = j.at("scores");
      if (ids.size() != dists.size() || ids.size() != scores.size()) {
        raise(ErrorCode::ParseError, where + ": candidates/distances/scores lengths differ");
      }
      for (std::size_t i = 0; i < ids.size(); ++i) {
        r.entries.push_back({ids[i].get<std::string>(), dists[i].get<double>(),
                             scores[i].get<double>()});
      }
      r.truncated_at = r.entries.size();
      r.pool_size = j.value("pool_size", r.entries.size());
      rankings.push_back(std::move(r));
    } catch (const Error&) {
      throw;
    } catch (const std::exception& e) {
      raise(ErrorCode::ParseError, where + ": " + e.what());
    }
  }
  if (rankings.empty()) raise(ErrorCode::ParseError, path + ": no rankings");
  return rankings;
}

// ---------------------------------------------------------------------------
// ingest

struct IngestOpts {
  std::string input;
  std::string bank;
  std::string manifest;
  std::string id_prefix = "item";
  std::size_t set_size = 1;
  ConfigFlag config;
};

EmbeddingBank parse_float_table(const std::string& path) {
  require_file(path);
  std::ifstream in(path);
  if (!in) raise(ErrorCode::IoError, "cannot open " + path);
  EmbeddingBank bank;
  std::string line;
  std::size_t lineno = 0;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++lineno;
    for (char& c : line) {
      if (c == ',' || c == '\t' || c == '\r') c = ' ';
    }
    std::istringstream ss(line);
    std::string tok;
    std::vector<float> row;
    while (ss >> tok) {
      try {
        std::size_t used = 0;
        const float v = std::stof(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
        row.push_back(v);
      } catch (const std::exception&) {
        raise(ErrorCode::ParseError, path + ":" + std::to_string(lineno) +
                                         ": not a number: \"" + tok + "\"");
      }
    }
    if (row.empty()) continue;
    if (bank.dim == 0) {
      bank.dim = static_cast<std::uint32_t>(row.size());
    } else if (row.size() != bank.dim) {
      raise(ErrorCode::ParseError,
            path + ":" + std::to_string(lineno) + ": expected " +
                std::to_string(bank.dim) + " values, got " + std::to_string(row.size()));
    }
    bank.data.insert(bank.data.end(), row.begin(), row.end());
    ++rows;
  }
  if (rows == 0) raise(ErrorCode::ParseError, path + ": no rows");
  return bank;
}

int run_ingest(const IngestOpts& opts) {
  const EmbeddingBank bank = parse_float_table(opts.input);
  write_bank(opts.bank, bank);
  std::cout << "wrote " << opts.bank << ": dim=" << bank.dim
            << " rows=" << bank.count() << "\n";

  if (!opts.manifest.empty()) {
    if (opts.set_size < 1) {
      raise(ErrorCode::InvalidArgument, "--set-size must be >= 1");
    }
    if (bank.count() % opts.set_size != 0) {
      raise(ErrorCode::InvalidArgument,
            std::to_string(bank.count()) + " rows do not divide into sets of " +
                std::to_string(opts.set_size));
    }
    const auto manifest_dir = std::filesystem::absolute(opts.manifest).parent_path();
    std::error_code ec;
    std::filesystem::path rel =
        std::filesystem::relative(std::filesystem::absolute(opts.bank), manifest_dir, ec);
    if (ec || rel.empty()) rel = std::filesystem::absolute(opts.bank);

    std::ofstream out(opts.manifest, std::ios::binary | std::ios::trunc);
    if (!out) raise(ErrorCode::IoError, "cannot open " + opts.manifest + " for writing");
    const std::size_t n_sets = bank.count() / opts.set_size;
    for (std::size_t s = 0; s < n_sets; ++s) {
      ordered_json line;
      std::ostringstream id;
      id << opts.id_prefix << "_" << std::setw(4) << std::setfill('0') << s;
      line["id"] = id.str();
      line["bank"] = rel.generic_string();
      ordered_json rows_json = ordered_json::array();
      for (std::size_t i = 0; i < opts.set_size; ++i) {
        rows_json.push_back(s * opts.set_size + i);
      }
      line["rows"] = std::move(rows_json);
      out << line.dump() << "\n";
    }
    if (!out) raise(ErrorCode::IoError, "short write to " + opts.manifest);
    std::cout << "wrote " << opts.manifest << ": sets=" << n_sets
              << " (set size " << opts.set_size << ")\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// synth

struct SynthOpts {
  SynthFlags flags;
  std::uint64_t seed = 7;
  std::string out_dir;
  ConfigFlag config;
};

int run_synth(const SynthOpts& opts) {
  const SynthInstance inst = generate_instance(opts.flags.resolve(opts.seed));
  std::filesystem::create_directories(opts.out_dir);
  write_instance(inst, opts.out_dir);
  std::cout << "wrote " << opts.out_dir << ": candidates=" << inst.db.size()
            << " queries=" << inst.queries.size() << " dim=" << inst.db.dim
            << " seed=" << inst.params.seed << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// retrieve

struct RetrieveOpts {
  ScoringFlags scoring;
  std::string db_path;
  std::string queries_path;
  std::string out_path;
  std::vector<std::size_t> ks = {50};
  unsigned workers = 1;
  ConfigFlag config;
};

int run_retrieve(const RetrieveOpts& opts) {
  check_k_list(opts.ks);
  require_file(opts.db_path);
  require_file(opts.queries_path);
  if (opts.workers < 1) raise(ErrorCode::InvalidArgument, "--workers must be >= 1");

  const ScoringConfig cfg = opts.scoring.resolve();
  const CandidateDatabase db = load_database(opts.db_path);
  const std::vector<QueryRecord> queries = load_queries(opts.queries_path);
  const std::size_t depth = opts.ks.back();

  std::vector<Ranking> rankings;
  rankings.reserve(queries.size());
  for (const QueryRecord& q : queries) {
    rankings.push_back(retrieve(q, db, cfg, depth, opts.workers));
  }
  write_rankings(opts.out_path, rankings);
  std::cout << "wrote " << opts.out_path << ": queries=" << rankings.size()
            << " depth=" << depth << " mode=" << score_mode_name(cfg.mode) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// eval

struct EvalOpts {
  std::vector<std::string> rankings_paths;
  std::string labels_path;
  std::string queries_path;
  std::vector<std::size_t> ks = {1, 5, 10};
  std::vector<std::uint64_t> seeds;
  std::string format = "table";
  std::string out_path;
  ConfigFlag config;
};

int run_eval(const EvalOpts& opts) {
  check_k_list(opts.ks);
  for (const std::string& p : opts.rankings_paths) require_file(p);
  require_file(opts.labels_path);
  if (!opts.queries_path.empty()) require_file(opts.queries_path);

  const std::vector<GroundTruth> truth = load_labels(opts.labels_path);

  std::unordered_map<std::string, std::vector<std::string>> subsets;
  if (!opts.queries_path.empty()) {
    for (const QueryRecord& q : load_queries(opts.queries_path)) {
      if (q.subset) subsets[q.id] = *q.subset;
    }
  }

  const bool label_by_seed = opts.seeds.size() == opts.rankings_paths.size();
  std::vector<ordered_json> rows;
  std::map<std::pair<std::string, std::size_t>, std::pair<double, std::size_t>> sums;

  for (std::size_t run = 0; run < opts.rankings_paths.size(); ++run) {
    const std::vector<Ranking> rankings = read_rankings(opts.rankings_paths[run]);
    const std::string label =
        label_by_seed ? std::to_string(opts.seeds[run])
                      : std::filesystem::path(opts.rankings_paths[run]).stem().string();

    std::vector<Ranking> restricted;
    for (const Ranking& r : rankings) {
      if (subsets.count(r.query_id)) restricted.push_back(r);
    }

    for (const std::size_t k : opts.ks) {
      std::vector<MetricReport> reports = {recall_at_k(rankings, truth, k),
                                           map_at_k(rankings, truth, k)};
      if (!restricted.empty()) {
        reports.push_back(subset_recall_at_k(restricted, truth, k, subsets));
      }
      for (const MetricReport& m : reports) {
        ordered_json row;
        row["run"] = label;
        row["metric"] = m.metric;
        row["k"] = m.k;
        row["value"] = m.value;
        row["n_queries"] = m.n_queries;
        rows.push_back(std::move(row));
        auto& agg = sums[{m.metric, m.k}];
        agg.first += m.value;
        agg.second += m.n_queries;
      }
    }
  }

  if (opts.rankings_paths.size() > 1) {
    const double n_runs = static_cast<double>(opts.rankings_paths.size());
    for (const auto& [key, agg] : sums) {
      ordered_json row;
      row["run"] = "mean";
      row["metric"] = key.first;
      row["k"] = key.second;
      row["value"] = agg.first / n_runs;
      row["n_queries"] = agg.second;
      rows.push_back(std::move(row));
    }
  }

  emit_rows(opts.format, opts.out_path, {"run", "metric", "k", "value", "n_queries"},
            rows);
  return 0;
}

// ---------------------------------------------------------------------------
// ablate

struct AblateOpts {
  ScoringFlags scoring;
  SynthFlags synth;
  bool use_synth = false;
  std::string db_path;
  std::string queries_path;
  std::string labels_path;
  std::vector<std::size_t> ks = {1, 5};
  std::vector<double> alphas;
  std::vector<double> taus;
  std::vector<std::string> modes;
  std::vector<std::size_t> k_primes = {0};
  std::vector<std::size_t> m_primes = {0};
  std::vector<std::string> transitions;
  std::vector<std::uint64_t> seeds = {7};
  std::string format = "csv";
  std::string out_path;
  unsigned workers = 1;
  ConfigFlag config;
};

CandidateDatabase subsample_db(const CandidateDatabase& db, std::size_t m_prime) {
  if (m_prime == 0) return db;
  CandidateDatabase out;
  out.manifest_meta = db.manifest_meta;
  for (std::size_t i = 0; i < db.size(); ++i) {
    if (db.sets[i].size() < m_prime) {
      raise(ErrorCode::InvalidArgument,
            "m_prime=" + std::to_string(m_prime) + " exceeds set size of " + db.ids[i]);
    }
    std::vector<Embedding> pts(db.sets[i].points.begin(),
                               db.sets[i].points.begin() + m_prime);
    out.add(db.ids[i], TargetDistribution::from(std::move(pts)));
  }
  return out;
}

std::vector<QueryRecord> subsample_queries(const std::vector<QueryRecord>& queries,
                                           std::size_t k_prime) {
  if (k_prime == 0) return queries;
  std::vector<QueryRecord> out = queries;
  for (QueryRecord& q : out) {
    if (q.captions.size() < k_prime) {
      raise(ErrorCode::InvalidArgument,
            "k_prime=" + std::to_string(k_prime) + " exceeds caption count of " + q.id);
    }
    q.captions.resize(k_prime);
  }
  return out;
}

int run_ablate(const AblateOpts& opts) {
  check_k_list(opts.ks);
  if (opts.workers < 1) raise(ErrorCode::InvalidArgument, "--workers must be >= 1");
  const bool file_mode = !opts.db_path.empty() || !opts.queries_path.empty() ||
                         !opts.labels_path.empty();
  if (opts.use_synth == file_mode) {
    raise(ErrorCode::InvalidArgument,
          "provide either --synth or --db/--queries/--labels");
  }
  if (file_mode && (opts.db_path.empty() || opts.queries_path.empty() ||
                    opts.labels_path.empty())) {
    raise(ErrorCode::InvalidArgument,
          "file mode needs all of --db, --queries, and --labels");
  }

  const std::vector<double> alphas =
      opts.alphas.empty() ? std::vector<double>{opts.scoring.cfg.alpha} : opts.alphas;
  const std::vector<double> taus =
      opts.taus.empty() ? std::vector<double>{opts.scoring.cfg.tau} : opts.taus;
  const std::vector<std::string> modes =
      opts.modes.empty() ? std::vector<std::string>{opts.scoring.mode} : opts.modes;
  const std::vector<std::string> transitions =
      opts.transitions.empty()
          ? std::vector<std::string>{opts.scoring.cfg.use_transition ? "on" : "off"}
          : opts.transitions;
  for (const std::string& t : transitions) {
    if (t != "on" && t != "off") {
      raise(ErrorCode::InvalidArgument, "--transition values must be on or off");
    }
  }

  struct Inputs {
    std::string seed_label;
    CandidateDatabase db;
    std::vector<QueryRecord> queries;
    std::vector<GroundTruth> truth;
  };
  std::vector<Inputs> runs;
  if (opts.use_synth) {
    for (const std::uint64_t seed : opts.seeds) {
      SynthInstance inst = generate_instance(opts.synth.resolve(seed));
      runs.push_back({std::to_string(seed), std::move(inst.db), std::move(inst.queries),
                      std::move(inst.truth)});
    }
  } else {
    require_file(opts.db_path);
    require_file(opts.queries_path);
    require_file(opts.labels_path);
    runs.push_back({"file", load_database(opts.db_path), load_queries(opts.queries_path),
                    load_labels(opts.labels_path)});
  }

  std::vector<ordered_json> rows;
  for (const Inputs& in : runs) {
    for (const std::size_t m_prime : opts.m_primes) {
      const CandidateDatabase db = subsample_db(in.db, m_prime);
      for (const std::size_t k_prime : opts.k_primes) {
        const std::vector<QueryRecord> queries = subsample_queries(in.queries, k_prime);
        for (const std::string& mode : modes) {
          for (const double alpha : alphas) {
            for (const double tau : taus) {
              for (const std::string& trans : transitions) {
                ScoringConfig cfg = opts.scoring.resolve();
                cfg.mode = parse_score_mode(mode);
                cfg.alpha = alpha;
                cfg.tau = tau;
                cfg.use_transition = trans == "on";

                std::vector<Ranking> rankings;
                rankings.reserve(queries.size());
                for (const QueryRecord& q : queries) {
                  rankings.push_back(retrieve(q, db, cfg, opts.ks.back(), opts.workers));
                }
                for (const std::size_t k : opts.ks) {
                  for (const MetricReport& m : {recall_at_k(rankings, in.truth, k),
                                                map_at_k(rankings, in.truth, k)}) {
                    ordered_json row;
                    row["alpha"] = alpha;
                    row["k_prime"] = k_prime;
                    row["m_prime"] = m_prime;
                    row["tau"] = tau;
                    row["mode"] = mode;
                    row["transition"] = trans;
                    row["seed"] = in.seed_label;
                    row["metric"] = m.metric;
                    row["k"] = m.k;
                    row["value"] = m.value;
                    row["n_queries"] = m.n_queries;
                    rows.push_back(std::move(row));
                  }
                }
              }
            }
          }
        }
      }
    }
  }

  emit_rows(opts.format, opts.out_path,
            {"alpha", "k_prime", "m_prime", "tau", "mode", "transition", "seed",
             "metric", "k", "value", "n_queries"},
            rows);
  return 0;
}

// ---------------------------------------------------------------------------
// bench

struct BenchOpts {
  ScoringFlags scoring;
  std::size_t n_candidates = 10000;
  std::size_t k_captions = 5;
  std::size_t m_augmentations = 10;
  std::size_t d = 512;
  std::size_t n_queries = 20;
  std::size_t depth = 10;
  unsigned workers = 1;
  std::uint64_t seed = 7;
  std::string format = "table";
  std::string out_path;
  ConfigFlag config;
};

int run_bench(const BenchOpts& opts) {
  if (opts.workers < 1) raise(ErrorCode::InvalidArgument, "--workers must be >= 1");
  if (opts.n_candidates < 1 || opts.n_queries < 1 || opts.d < 2 ||
      opts.k_captions < 1 || opts.m_augmentations < 1) {
    raise(ErrorCode::InvalidArgument, "bench sizes must be positive (d >= 2)");
  }
  const ScoringConfig cfg = opts.scoring.resolve();

  Pcg32 rng(opts.seed);
  CandidateDatabase db;
  for (std::size_t i = 0; i < opts.n_candidates; ++i) {
    std::vector<Embedding> pts;
    pts.reserve(opts.m_augmentations);
    for (std::size_t m = 0; m < opts.m_augmentations; ++m) {
      pts.push_back(rng.next_unit_vector(opts.d));
    }
    std::ostringstream id;
    id << "c" << std::setw(6) << std::setfill('0') << i;
    db.add(id.str(), TargetDistribution::from(std::move(pts)));
  }
  std::vector<QueryRecord> queries;
  for (std::size_t i = 0; i < opts.n_queries; ++i) {
    QueryRecord q;
    q.id = "q" + std::to_string(i);
    for (std::size_t k = 0; k < opts.k_captions; ++k) {
      q.captions.push_back(rng.next_unit_vector(opts.d));
    }
    q.delta = TransitionVector::from(rng.next_unit_vector(opts.d));
    queries.push_back(std::move(q));
  }

  using clock = std::chrono::steady_clock;
  retrieve(queries.front(), db, cfg, opts.depth, opts.workers);  // warmup

  std::vector<Ranking> rankings;
  std::vector<double> latency;
  const auto run_start = clock::now();
  for (const QueryRecord& q : queries) {
    const auto t0 = clock::now();
    rankings.push_back(retrieve(q, db, cfg, opts.depth, opts.workers));
    latency.push_back(std::chrono::duration<double>(clock::now() - t0).count());
  }
  const double total_s = std::chrono::duration<double>(clock::now() - run_start).count();

  ordered_json row;
  row["mode"] = score_mode_name(cfg.mode);
  row["n_candidates"] = opts.n_candidates;
  row["k_captions"] = opts.k_captions;
  row["m_augmentations"] = opts.m_augmentations;
  row["d"] = opts.d;
  row["workers"] = opts.workers;
  row["n_queries"] = opts.n_queries;

  std::vector<double> sorted = latency;
  std::sort(sorted.begin(), sorted.end());
  const auto quantile = [&](double q) {
    const std::size_t idx = std::min(
        sorted.size() - 1, static_cast<std::size_t>(q * static_cast<double>(sorted.size())));
    return sorted[idx];
  };
  row["mean_s"] = std::accumulate(latency.begin(), latency.end(), 0.0) /
                  static_cast<double>(latency.size());
  row["p50_s"] = quantile(0.50);
  row["p95_s"] = quantile(0.95);
  row["total_s"] = total_s;

  if (opts.workers > 1) {
    const auto t0 = clock::now();
    bool identical = true;
    for (std::size_t i = 0; i < queries.size(); ++i) {
      const Ranking serial = retrieve(queries[i], db, cfg, opts.depth, 1);
      if (serial.entries.size() != rankings[i].entries.size()) identical = false;
      for (std::size_t e = 0; identical && e < serial.entries.size(); ++e) {
        identical = serial.entries[e].candidate_id == rankings[i].entries[e].candidate_id &&
                    serial.entries[e].distance == rankings[i].entries[e].distance;
      }
    }
    row["single_worker_total_s"] = std::chrono::duration<double>(clock::now() - t0).count();
    row["deterministic"] = identical ? "yes" : "NO";
    if (!identical) {
      emit_rows(opts.format, opts.out_path,
                {"mode", "n_candidates", "k_captions", "m_augmentations", "d", "workers",
                 "n_queries", "mean_s", "p50_s", "p95_s", "total_s",
                 "single_worker_total_s", "deterministic"},
                {row});
      raise(ErrorCode::InvalidArgument, "rankings differ across worker counts");
    }
  } else {
    row["single_worker_total_s"] = nullptr;
    row["deterministic"] = "yes";
  }

  emit_rows(opts.format, opts.out_path,
            {"mode", "n_candidates", "k_captions", "m_augmentations", "d", "workers",
             "n_queries", "mean_s", "p50_s", "p95_s", "total_s", "single_worker_total_s",
             "deterministic"},
            {row});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Set-to-set embedding retrieval with transition fusion and "
               "bidirectional conditional transport"};
  app.require_subcommand(1);

  IngestOpts ingest;
  CLI::App* c_ingest = app.add_subcommand(
      "ingest", "Convert a text/CSV table of floats into a bank (+ optional manifest)");
  c_ingest->add_option("input", ingest.input, "Input text/CSV file of float rows")
      ->required();
  c_ingest->add_option("--bank", ingest.bank, "Output bank path")->required();
  c_ingest->add_option("--manifest", ingest.manifest,
                       "Also write a candidate manifest grouping rows into sets");
  c_ingest->add_option("--set-size", ingest.set_size, "Rows per candidate set")
      ->capture_default_str();
  c_ingest->add_option("--id-prefix", ingest.id_prefix, "Candidate id prefix")
      ->capture_default_str();
  ingest.config.attach(c_ingest);

  SynthOpts synth;
  CLI::App* c_synth = app.add_subcommand(
      "synth", "Generate a planted-target synthetic instance and write it to a directory");
  synth.flags.attach(c_synth);
  c_synth->add_option("--seed", synth.seed, "Generator seed")->capture_default_str();
  c_synth->add_option("--out", synth.out_dir, "Output directory")->required();
  synth.config.attach(c_synth);

  RetrieveOpts retrieve_opts;
  CLI::App* c_retrieve =
      app.add_subcommand("retrieve", "Rank candidates for each query, write JSONL rankings");
  retrieve_opts.scoring.attach(c_retrieve);
  c_retrieve->add_option("--db", retrieve_opts.db_path, "Candidate manifest")->required();
  c_retrieve->add_option("--queries", retrieve_opts.queries_path, "Query manifest")
      ->required();
  c_retrieve->add_option("--out", retrieve_opts.out_path, "Output rankings JSONL")
      ->required();
  c_retrieve
      ->add_option("--k", retrieve_opts.ks,
                   "Metric k list (comma separated); rankings keep max(k) entries")
      ->delimiter(',')
      ->capture_default_str();
  c_retrieve->add_option("--workers", retrieve_opts.workers, "Scoring threads")
      ->capture_default_str();
  retrieve_opts.config.attach(c_retrieve);

  EvalOpts eval;
  CLI::App* c_eval =
      app.add_subcommand("eval", "Compute recall@k / map@k from rankings and labels");
  c_eval->add_option("--rankings", eval.rankings_paths, "Rankings JSONL (repeatable)")
      ->required();
  c_eval->add_option("--labels", eval.labels_path, "Ground-truth labels JSONL")
      ->required();
  c_eval->add_option("--queries", eval.queries_path,
                     "Query manifest (enables subset_recall for subset queries)");
  c_eval->add_option("--k", eval.ks, "Metric k list (comma separated, ascending)")
      ->delimiter(',')
      ->capture_default_str();
  c_eval->add_option("--seed", eval.seeds,
                     "Seed labels for the rankings files (repeatable)");
  c_eval->add_option("--format", eval.format, "table | csv | jsonl")
      ->check(CLI::IsMember({"table", "csv", "jsonl"}))
      ->capture_default_str();
  c_eval->add_option("--out", eval.out_path, "Write output here instead of stdout");
  eval.config.attach(c_eval);

  AblateOpts ablate;
  CLI::App* c_ablate = app.add_subcommand(
      "ablate", "Sweep alpha / tau / mode / transition / K' / M' and emit long-format rows");
  ablate.scoring.attach_common(c_ablate);
  ablate.synth.attach(c_ablate);
  c_ablate->add_flag("--synth", ablate.use_synth,
                     "Generate instances instead of reading files (uses --seed list)");
  c_ablate->add_option("--db", ablate.db_path, "Candidate manifest (file mode)");
  c_ablate->add_option("--queries", ablate.queries_path, "Query manifest (file mode)");
  c_ablate->add_option("--labels", ablate.labels_path, "Labels JSONL (file mode)");
  c_ablate->add_option("--k", ablate.ks, "Metric k list (comma separated, ascending)")
      ->delimiter(',')
      ->capture_default_str();
  c_ablate->add_option("--alpha", ablate.alphas, "Alpha values to sweep (comma separated)")
      ->delimiter(',');
  c_ablate->add_option("--tau", ablate.taus, "Tau values to sweep (comma separated)")
      ->delimiter(',');
  c_ablate->add_option("--mode", ablate.modes, "Modes to sweep (comma separated)")
      ->delimiter(',')
      ->check(CLI::IsMember({"ct", "ot", "cosine_mean"}));
  c_ablate->add_option("--k-prime", ablate.k_primes,
                       "Caption subsample sizes; 0 = use all (comma separated)")
      ->delimiter(',')
      ->capture_default_str();
  c_ablate->add_option("--m-prime", ablate.m_primes,
                       "Augmentation subsample sizes; 0 = use all (comma separated)")
      ->delimiter(',')
      ->capture_default_str();
  c_ablate->add_option("--transition", ablate.transitions,
                       "Transition toggles: on,off (comma separated)")
      ->delimiter(',');
  c_ablate->add_option("--seed", ablate.seeds, "Synth-mode seeds (repeatable)");
  c_ablate->add_option("--format", ablate.format, "table | csv | jsonl")
      ->check(CLI::IsMember({"table", "csv", "jsonl"}))
      ->capture_default_str();
  c_ablate->add_option("--out", ablate.out_path, "Write output here instead of stdout");
  c_ablate->add_option("--workers", ablate.workers, "Scoring threads")
      ->capture_default_str();
  ablate.config.attach(c_ablate);

  BenchOpts bench;
  CLI::App* c_bench = app.add_subcommand(
      "bench", "Time scoring-only retrieval latency on random unit vectors");
  bench.scoring.attach(c_bench);
  c_bench->add_option("--n", bench.n_candidates, "Candidate sets")->capture_default_str();
  c_bench->add_option("--k-captions", bench.k_captions, "Captions per query")
      ->capture_default_str();
  c_bench->add_option("--m-augmentations", bench.m_augmentations,
                      "Points per candidate set")
      ->capture_default_str();
  c_bench->add_option("--d", bench.d, "Embedding dimension")->capture_default_str();
  c_bench->add_option("--n-queries", bench.n_queries, "Queries to time")
      ->capture_default_str();
  c_bench->add_option("--depth", bench.depth, "Ranking depth kept per query")
      ->capture_default_str();
  c_bench->add_option("--workers", bench.workers, "Scoring threads")
      ->capture_default_str();
  c_bench->add_option("--seed", bench.seed, "Generator seed")->capture_default_str();
  c_bench->add_option("--format", bench.format, "table | csv | jsonl")
      ->check(CLI::IsMember({"table", "csv", "jsonl"}))
      ->capture_default_str();
  c_bench->add_option("--out", bench.out_path, "Write output here instead of stdout");
  bench.config.attach(c_bench);

  c_ingest->callback([&] { ingest.config.apply(c_ingest); run_ingest(ingest); });
  c_synth->callback([&] { synth.config.apply(c_synth); run_synth(synth); });
  c_retrieve->callback([&] {
    retrieve_opts.config.apply(c_retrieve);
    run_retrieve(retrieve_opts);
  });
  c_eval->callback([&] { eval.config.apply(c_eval); run_eval(eval); });
  c_ablate->callback([&] { ablate.config.apply(c_ablate); run_ablate(ablate); });
  c_bench->callback([&] { bench.config.apply(c_bench); run_bench(bench); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const Error& e) {
    std::cerr << "error[" << e.code_name() << "]: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error[Unhandled]: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
