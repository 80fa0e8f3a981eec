#include "setret/store.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include "json.hpp"

namespace setret {

namespace {

using nlohmann::json;

constexpr char kMagic[4] = {'S', 'T', 'C', 'H'};
constexpr std::uint16_t kVersion = 1;

void put_bytes(std::string& out, const void* src, std::size_t n) {
  out.append(static_cast<const char*>(src), n);
}

template <typename T>
void put_le(std::string& out, T value) {
  static_assert(std::is_integral_v<T>);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>((value >> (8 * i)) & 0xff));
  }
}

template <typename T>
T get_le(const unsigned char* src) {
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    value |= static_cast<T>(src[i]) << (8 * i);
  }
  return value;
}

float get_f32_le(const unsigned char* src) {
  return std::bit_cast<float>(get_le<std::uint32_t>(src));
}

}  // namespace

void write_bank(const std::string& path, const EmbeddingBank& bank) {
  if (bank.dim == 0) raise(ErrorCode::DimZero, "bank dimension is zero: " + path);
  if (bank.data.size() % bank.dim != 0) {
    raise(ErrorCode::InvalidArgument, "bank data size is not a multiple of dim");
  }
  for (std::size_t i = 0; i < bank.data.size(); ++i) {
    if (!std::isfinite(bank.data[i])) {
      raise(ErrorCode::NonFinite,
            "bank entry " + std::to_string(i) + " is not finite");
    }
  }

  std::string buf;
  buf.reserve(18 + bank.data.size() * 4);
  put_bytes(buf, kMagic, 4);
  put_le<std::uint16_t>(buf, kVersion);
  put_le<std::uint32_t>(buf, bank.dim);
  put_le<std::uint64_t>(buf, static_cast<std::uint64_t>(bank.count()));
  for (float v : bank.data) {
    put_le<std::uint32_t>(buf, std::bit_cast<std::uint32_t>(v));
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(ErrorCode::IoError, "cannot open for writing: " + path);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) raise(ErrorCode::IoError, "short write: " + path);
}

EmbeddingBank read_bank(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorCode::IoError, "cannot open for reading: " + path);
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto* bytes = reinterpret_cast<const unsigned char*>(buf.data());

  if (buf.size() < 4 || std::memcmp(buf.data(), kMagic, 4) != 0) {
    raise(ErrorCode::BadMagic, "not an embedding bank: " + path);
  }
  if (buf.size() < 18) {
    raise(ErrorCode::TruncatedFile, "header cut short: " + path);
  }
  const auto version = get_le<std::uint16_t>(bytes + 4);
  if (version != kVersion) {
    raise(ErrorCode::UnsupportedVersion,
          "bank version " + std::to_string(version) + " (expected 1): " + path);
  }
  const auto dim = get_le<std::uint32_t>(bytes + 6);
  const auto count = get_le<std::uint64_t>(bytes + 10);
  if (dim == 0) raise(ErrorCode::DimZero, "bank dimension is zero: " + path);

  const std::size_t expected = 18 + static_cast<std::size_t>(count) * dim * 4;
  if (buf.size() < expected) {
    raise(ErrorCode::TruncatedFile,
          "payload has " + std::to_string(buf.size() - 18) + " bytes, header promises " +
              std::to_string(expected - 18) + ": " + path);
  }
  if (buf.size() > expected) {
    raise(ErrorCode::IoError, "unexpected trailing bytes: " + path);
  }

  EmbeddingBank bank;
  bank.dim = dim;
  bank.data.resize(static_cast<std::size_t>(count) * dim);
  for (std::size_t i = 0; i < bank.data.size(); ++i) {
    bank.data[i] = get_f32_le(bytes + 18 + i * 4);
  }
  return bank;
}

void CandidateDatabase::add(std::string id, TargetDistribution set) {
  if (index.contains(id)) {
    raise(ErrorCode::DuplicateCandidateId, "duplicate candidate id: " + id);
  }
  if (dim == 0) {
    dim = set.dim();
  } else if (set.dim() != dim) {
    raise(ErrorCode::DimMismatchAcrossBanks,
          "candidate " + id + " has dim " + std::to_string(set.dim()) +
              ", database has " + std::to_string(dim));
  }
  index.emplace(id, ids.size());
  ids.push_back(std::move(id));
  sets.push_back(std::move(set));
}

namespace {

// Shared JSONL walk: parses each line, peels an optional leading meta line,
// and hands every record to `fn` along with its 1-based line number.
std::map<std::string, std::string> for_each_record(
    const std::string& path, const std::function<void(const json&, int)>& fn) {
  std::ifstream in(path);
  if (!in) raise(ErrorCode::IoError, "cannot open manifest: " + path);

  std::map<std::string, std::string> meta;
  std::string line;
  int line_no = 0;
  bool first_record = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json row;
    try {
      row = json::parse(line);
    } catch (const json::parse_error& e) {
      raise(ErrorCode::ParseError,
            path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (!row.is_object()) {
      raise(ErrorCode::ParseError,
            path + ":" + std::to_string(line_no) + ": expected a JSON object");
    }
    if (first_record && row.contains("meta")) {
      for (const auto& [key, value] : row.at("meta").items()) {
        meta[key] = value.is_string() ? value.get<std::string>() : value.dump();
      }
      first_record = false;
      continue;
    }
    first_record = false;
    fn(row, line_no);
  }
  return meta;
}

[[noreturn]] void bad_field(const std::string& path, int line_no, const std::string& what) {
  raise(ErrorCode::ParseError, path + ":" + std::to_string(line_no) + ": " + what);
}

template <typename T>
T require_field(const json& row, const char* key, const std::string& path, int line_no) {
  if (!row.contains(key)) bad_field(path, line_no, std::string("missing \"") + key + "\"");
  try {
    return row.at(key).get<T>();
  } catch (const json::exception&) {
    bad_field(path, line_no, std::string("field \"") + key + "\" has the wrong type");
  }
}

// Banks referenced by a manifest, loaded once and addressed relative to the
// manifest's own directory.
class BankCache {
 public:
  explicit BankCache(const std::string& manifest_path)
      : base_(std::filesystem::path(manifest_path).parent_path()) {}

  const EmbeddingBank& get(const std::string& name) {
    const std::string resolved = (base_ / name).string();
    auto it = banks_.find(resolved);
    if (it == banks_.end()) {
      it = banks_.emplace(resolved, read_bank(resolved)).first;
    }
    return it->second;
  }

 private:
  std::filesystem::path base_;
  std::unordered_map<std::string, EmbeddingBank> banks_;
};

Embedding row_embedding(const EmbeddingBank& bank, std::uint64_t row_idx, bool normalize_row,
                        const std::string& path, int line_no) {
  if (row_idx >= bank.count()) {
    bad_field(path, line_no,
              "row " + std::to_string(row_idx) + " out of range (bank has " +
                  std::to_string(bank.count()) + " rows)");
  }
  const auto row = bank.row(static_cast<std::size_t>(row_idx));
  if (normalize_row) return normalize(row);
  Embedding e;
  e.values.assign(row.begin(), row.end());
  return e;
}

}  // namespace

CandidateDatabase load_database(const std::string& manifest_path, bool normalize) {
  CandidateDatabase db;
  BankCache banks(manifest_path);

  db.manifest_meta = for_each_record(manifest_path, [&](const json& row, int line_no) {
    const auto id = require_field<std::string>(row, "id", manifest_path, line_no);
    const auto bank_name = require_field<std::string>(row, "bank", manifest_path, line_no);
    const auto rows =
        require_field<std::vector<std::uint64_t>>(row, "rows", manifest_path, line_no);
    if (rows.empty()) bad_field(manifest_path, line_no, "candidate has no rows");

    const EmbeddingBank& bank = banks.get(bank_name);
    std::vector<Embedding> points;
    points.reserve(rows.size());
    for (std::uint64_t r : rows) {
      if (r >= bank.count()) {
        raise(ErrorCode::RowOutOfRange,
              manifest_path + ":" + std::to_string(line_no) + ": row " +
                  std::to_string(r) + " out of range (bank has " +
                  std::to_string(bank.count()) + " rows)");
      }
      points.push_back(row_embedding(bank, r, normalize, manifest_path, line_no));
    }
    db.add(id, TargetDistribution::from(std::move(points)));
  });
  return db;
}

std::vector<QueryRecord> load_queries(const std::string& manifest_path, bool normalize) {
  std::vector<QueryRecord> queries;
  BankCache banks(manifest_path);

  for_each_record(manifest_path, [&](const json& row, int line_no) {
    QueryRecord q;
    q.id = require_field<std::string>(row, "id", manifest_path, line_no);
    const auto bank_name = require_field<std::string>(row, "bank", manifest_path, line_no);
    const auto caption_rows = require_field<std::vector<std::uint64_t>>(
        row, "caption_rows", manifest_path, line_no);
    if (caption_rows.empty()) bad_field(manifest_path, line_no, "query has no captions");

    const EmbeddingBank& bank = banks.get(bank_name);
    for (std::uint64_t r : caption_rows) {
      if (r >= bank.count()) {
        raise(ErrorCode::RowOutOfRange,
              manifest_path + ":" + std::to_string(line_no) + ": caption row " +
                  std::to_string(r) + " out of range");
      }
      q.captions.push_back(row_embedding(bank, r, normalize, manifest_path, line_no));
    }
    if (row.contains("delta_row") && !row.at("delta_row").is_null()) {
      const auto r = require_field<std::uint64_t>(row, "delta_row", manifest_path, line_no);
      if (r >= bank.count()) {
        raise(ErrorCode::RowOutOfRange,
              manifest_path + ":" + std::to_string(line_no) + ": delta row out of range");
      }
      q.delta = TransitionVector::from(
          row_embedding(bank, r, normalize, manifest_path, line_no));
    }
    if (row.contains("reference_row") && !row.at("reference_row").is_null()) {
      const auto r =
          require_field<std::uint64_t>(row, "reference_row", manifest_path, line_no);
      if (r >= bank.count()) {
        raise(ErrorCode::RowOutOfRange,
              manifest_path + ":" + std::to_string(line_no) + ": reference row out of range");
      }
      q.reference = row_embedding(bank, r, normalize, manifest_path, line_no);
    }
    if (row.contains("subset") && !row.at("subset").is_null()) {
      q.subset = require_field<std::vector<std::string>>(row, "subset", manifest_path,
                                                         line_no);
    }
    queries.push_back(std::move(q));
  });
  return queries;
}

std::vector<GroundTruth> load_labels(const std::string& manifest_path) {
  std::vector<GroundTruth> labels;

  for_each_record(manifest_path, [&](const json& row, int line_no) {
    GroundTruth gt;
    gt.query_id = require_field<std::string>(row, "query_id", manifest_path, line_no);
    gt.positives =
        require_field<std::vector<std::string>>(row, "positives", manifest_path, line_no);
    if (gt.positives.empty()) bad_field(manifest_path, line_no, "positives is empty");
    std::unordered_map<std::string, int> seen;
    for (const auto& p : gt.positives) {
      if (++seen[p] > 1) bad_field(manifest_path, line_no, "duplicate positive id: " + p);
    }
    labels.push_back(std::move(gt));
  });
  return labels;
}

}  // namespace setret
