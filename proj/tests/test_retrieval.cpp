#include "doctest.h"

#include <cmath>
#include <cstring>
#include <functional>
#include <string>
#include <vector>

#include "setret/oracles.hpp"
#include "setret/retrieval.hpp"
#include "setret/rng.hpp"
#include "setret/store.hpp"

using namespace setret;

namespace {

TargetDistribution random_set(Pcg32& rng, std::size_t m, std::size_t d) {
  std::vector<Embedding> pts;
  pts.reserve(m);
  for (std::size_t i = 0; i < m; ++i) pts.push_back(rng.next_unit_vector(d));
  return TargetDistribution::from(std::move(pts));
}

QueryRecord random_query(Pcg32& rng, std::size_t k, std::size_t d,
                         bool with_delta = true) {
  QueryRecord q;
  q.id = "q";
  for (std::size_t i = 0; i < k; ++i) q.captions.push_back(rng.next_unit_vector(d));
  if (with_delta) q.delta = TransitionVector::from(rng.next_unit_vector(d));
  return q;
}

CandidateDatabase random_db(Pcg32& rng, std::size_t n, std::size_t m, std::size_t d) {
  CandidateDatabase db;
  char buf[16];
  for (std::size_t i = 0; i < n; ++i) {
    std::snprintf(buf, sizeof(buf), "c%03zu", i);
    db.add(buf, random_set(rng, m, d));
  }
  return db;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::IoError;  // sentinel: "did not throw an Error"
}

bool same_ranking(const Ranking& a, const Ranking& b) {
  if (a.entries.size() != b.entries.size()) return false;
  for (std::size_t i = 0; i < a.entries.size(); ++i) {
    if (a.entries[i].candidate_id != b.entries[i].candidate_id) return false;
    if (std::memcmp(&a.entries[i].distance, &b.entries[i].distance, sizeof(double)) != 0)
      return false;
    if (std::memcmp(&a.entries[i].score, &b.entries[i].score, sizeof(double)) != 0)
      return false;
  }
  return true;
}

}  // namespace

TEST_SUITE("retrieval") {

TEST_CASE("identical candidates tie at score 0.5 with id tie-break") {
  Pcg32 rng(31);
  const TargetDistribution set = random_set(rng, 3, 8);
  CandidateDatabase db;
  db.add("b", set);
  db.add("a", set);
  const QueryRecord q = random_query(rng, 2, 8);

  const Ranking r = retrieve(q, db, ScoringConfig{}, 2);
  REQUIRE(r.entries.size() == 2);
  CHECK(r.entries[0].candidate_id == "a");
  CHECK(r.entries[1].candidate_id == "b");
  CHECK(r.entries[0].distance == r.entries[1].distance);
  CHECK(r.entries[0].score == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(r.entries[1].score == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("a candidate matching the fused captions ranks first at distance 0") {
  Pcg32 rng(32);
  const Embedding cap = rng.next_unit_vector(12);
  QueryRecord q;
  q.id = "q";
  q.captions = {cap, cap, cap};
  q.delta = TransitionVector::from(rng.next_unit_vector(12));

  const CaptionDistribution fused =
      build_caption_distribution(q.captions, q.delta, ScoringConfig{}.alpha);
  CandidateDatabase db = random_db(rng, 5, 4, 12);
  db.add("planted", TargetDistribution::from(std::vector<Embedding>(
                        4, fused.points.front())));

  const Ranking r = retrieve(q, db, ScoringConfig{}, 3);
  CHECK(r.entries[0].candidate_id == "planted");
  CHECK(r.entries[0].distance >= 0.0);
  CHECK(r.entries[0].distance < 1e-6);
}

TEST_CASE("cosine_mean with single points reduces to cosine distance") {
  Pcg32 rng(33);
  for (int trial = 0; trial < 20; ++trial) {
    QueryRecord q = random_query(rng, 1, 10, false);
    const TargetDistribution cand = random_set(rng, 1, 10);
    ScoringConfig cfg;
    cfg.mode = ScoreMode::kCosineMean;
    cfg.use_transition = false;
    const double got = score_candidate(q, cand, cfg);
    const double want = cosine_dist(q.captions[0], cand.points[0]);
    CHECK(got == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("score_candidate matches the transport oracle on fused captions") {
  Pcg32 rng(34);
  ScoringConfig cfg;
  for (int trial = 0; trial < 30; ++trial) {
    const QueryRecord q = random_query(rng, 3, 16);
    const TargetDistribution cand = random_set(rng, 5, 16);
    const CaptionDistribution fused =
        build_caption_distribution(q.captions, q.delta, cfg.alpha);
    const double got = score_candidate(q, cand, cfg);
    const double want = ct_oracle(fused, cand, cfg.tau);
    CHECK(got == doctest::Approx(want).epsilon(1e-6));
  }
}

TEST_CASE("worker count does not change the ranking") {
  Pcg32 rng(35);
  const CandidateDatabase db = random_db(rng, 37, 4, 16);
  const QueryRecord q = random_query(rng, 3, 16);

  const Ranking r1 = retrieve(q, db, ScoringConfig{}, 10, 1);
  const Ranking r2 = retrieve(q, db, ScoringConfig{}, 10, 2);
  const Ranking r8 = retrieve(q, db, ScoringConfig{}, 10, 8);
  CHECK(same_ranking(r1, r2));
  CHECK(same_ranking(r1, r8));
}

TEST_CASE("scores are a softmax over the scored pool") {
  Pcg32 rng(36);
  const CandidateDatabase db = random_db(rng, 12, 3, 8);
  const QueryRecord q = random_query(rng, 2, 8);

  const Ranking full = retrieve(q, db, ScoringConfig{}, 12);
  double total = 0.0;
  for (const RankedEntry& e : full.entries) {
    CHECK(e.score > 0.0);
    total += e.score;
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(full.pool_size == 12);
  for (std::size_t i = 1; i < full.entries.size(); ++i) {
    CHECK(full.entries[i - 1].distance <= full.entries[i].distance);
    CHECK(full.entries[i - 1].score >= full.entries[i].score);
  }

  const Ranking top = retrieve(q, db, ScoringConfig{}, 4);
  REQUIRE(top.entries.size() == 4);
  CHECK(top.pool_size == 12);
  double partial = 0.0;
  for (const RankedEntry& e : top.entries) partial += e.score;
  CHECK(partial < 1.0 + 1e-12);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(top.entries[i].candidate_id == full.entries[i].candidate_id);
    CHECK(top.entries[i].score == full.entries[i].score);
  }
}

TEST_CASE("subset retrieval matches a database holding only the subset") {
  Pcg32 rng(37);
  CandidateDatabase db = random_db(rng, 9, 3, 8);
  QueryRecord q = random_query(rng, 2, 8);
  q.subset = std::vector<std::string>{"c002", "c005", "c007"};

  const Ranking restricted = retrieve(q, db, ScoringConfig{}, 3);
  CHECK(restricted.pool_size == 3);

  CandidateDatabase sub;
  for (const std::string& id : *q.subset) {
    sub.add(id, db.sets[db.index.at(id)]);
  }
  QueryRecord bare = q;
  bare.subset.reset();
  const Ranking direct = retrieve(bare, sub, ScoringConfig{}, 3);

  REQUIRE(restricted.entries.size() == direct.entries.size());
  for (std::size_t i = 0; i < direct.entries.size(); ++i) {
    CHECK(restricted.entries[i].candidate_id == direct.entries[i].candidate_id);
    CHECK(restricted.entries[i].distance ==
          doctest::Approx(direct.entries[i].distance).epsilon(1e-12));
  }
}

TEST_CASE("retrieval errors carry their named codes") {
  Pcg32 rng(38);
  const CandidateDatabase db = random_db(rng, 4, 3, 8);

  QueryRecord no_delta = random_query(rng, 2, 8, false);
  CHECK(code_of([&] { retrieve(no_delta, db, ScoringConfig{}, 2); }) ==
        ErrorCode::MissingDelta);

  ScoringConfig no_trans;
  no_trans.use_transition = false;
  CHECK_NOTHROW(retrieve(no_delta, db, no_trans, 2));

  QueryRecord bad_subset = random_query(rng, 2, 8);
  bad_subset.subset = std::vector<std::string>{"c000", "nope"};
  CHECK(code_of([&] { retrieve(bad_subset, db, ScoringConfig{}, 2); }) ==
        ErrorCode::UnknownSubsetId);

  const QueryRecord q = random_query(rng, 2, 8);
  CandidateDatabase empty;
  CHECK(code_of([&] { retrieve(q, empty, ScoringConfig{}, 2); }) ==
        ErrorCode::EmptyDatabase);

  CHECK(code_of([&] { retrieve(q, db, ScoringConfig{}, 0); }) ==
        ErrorCode::InvalidArgument);

  ScoringConfig zero_temp;
  zero_temp.score_temperature = 0.0;
  CHECK(code_of([&] { retrieve(q, db, zero_temp, 2); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("optimal-transport mode ranks and never beats its own plan cost") {
  Pcg32 rng(39);
  const CandidateDatabase db = random_db(rng, 6, 4, 8);
  const QueryRecord q = random_query(rng, 4, 8);

  ScoringConfig cfg;
  cfg.mode = ScoreMode::kOt;
  const Ranking r = retrieve(q, db, cfg, 6);
  REQUIRE(r.entries.size() == 6);
  const CaptionDistribution fused =
      build_caption_distribution(q.captions, q.delta, cfg.alpha);
  for (const RankedEntry& e : r.entries) {
    const double exact = ot_oracle_exact(fused, db.sets[db.index.at(e.candidate_id)]);
    CHECK(e.distance >= exact - 1e-6);
  }
}

TEST_CASE("score temperature rescales scores without reordering") {
  Pcg32 rng(40);
  const CandidateDatabase db = random_db(rng, 8, 3, 8);
  const QueryRecord q = random_query(rng, 2, 8);

  ScoringConfig hot;
  hot.score_temperature = 5.0;
  const Ranking base = retrieve(q, db, ScoringConfig{}, 8);
  const Ranking scaled = retrieve(q, db, hot, 8);
  REQUIRE(base.entries.size() == scaled.entries.size());
  for (std::size_t i = 0; i < base.entries.size(); ++i) {
    CHECK(base.entries[i].candidate_id == scaled.entries[i].candidate_id);
    CHECK(base.entries[i].distance == scaled.entries[i].distance);
  }
  // Hotter temperature flattens the distribution toward uniform.
  CHECK(scaled.entries[0].score < base.entries[0].score);
}

}
