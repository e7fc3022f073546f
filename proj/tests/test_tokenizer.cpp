#include <doctest.h>

#include <filesystem>

#include "oracles.hpp"
#include "trajsv/error.hpp"
#include "trajsv/tokenizer.hpp"

using namespace trajsv;
using geom::SegmentMatrix;
using tok::TokenId;

namespace {

SegmentMatrix cells(int h, int w, std::initializer_list<int> flat) {
  SegmentMatrix m(h, w);
  for (int i : flat) m.set(i / w, i % w);
  return m;
}

std::vector<SegmentMatrix> random_stream(std::uint64_t seed, int count, int h = 10, int w = 10) {
  Rng rng(seed);
  std::vector<SegmentMatrix> out;
  for (int i = 0; i < count; ++i) out.push_back(oracle::random_matrix(rng, h, w));
  return out;
}

}  // namespace

TEST_CASE("vocabulary examples") {
  const auto a = cells(4, 4, {0, 1});
  const auto b = cells(4, 4, {10, 11});
  SUBCASE("[A, A, B]") {
    const std::vector<SegmentMatrix> stream{a, a, b};
    std::vector<TokenId> ids;
    const auto v = tok::build_vocabulary(stream, 4, 4, 0.3, &ids);
    REQUIRE(v.size() == 3);
    CHECK(v.reps()[0].empty());
    CHECK(v.reps()[1] == a);
    CHECK(v.reps()[2] == b);
    CHECK(ids == std::vector<TokenId>{1, 1, 2});
  }
  SUBCASE("all-zero stream keeps only PAD") {
    const std::vector<SegmentMatrix> stream(5, SegmentMatrix(4, 4));
    std::vector<TokenId> ids;
    CHECK(tok::build_vocabulary(stream, 4, 4, 0.3, &ids).size() == 1);
    CHECK(ids == std::vector<TokenId>(5, 0));
  }
  SUBCASE("threshold 1 merges exact duplicates only") {
    const auto near = cells(4, 4, {0, 1, 2});
    const std::vector<SegmentMatrix> stream{a, near, a, b, near};
    CHECK(tok::build_vocabulary(stream, 4, 4, 1.0).size() == 4);
  }
}

TEST_CASE("tokenize examples") {
  tok::TokenVocabulary v(10, 10, 0.3);
  // Probe covers cells 0..3. Rep 1 shares one cell out of ten, reps 2 and 3 one out of four.
  const auto probe = cells(10, 10, {0, 1, 2, 3});
  const auto r1 = cells(10, 10, {2, 50, 51, 52, 53, 54, 55});
  const auto r2 = cells(10, 10, {0});
  const auto r3 = cells(10, 10, {1});
  CHECK(v.assign_or_insert(r1) == 1);
  CHECK(v.assign_or_insert(r2) == 2);
  CHECK(v.assign_or_insert(r3) == 3);
  REQUIRE(oracle::jaccard(probe, r1) == doctest::Approx(0.1));
  REQUIRE(oracle::jaccard(probe, r2) == 0.25);
  REQUIRE(oracle::jaccard(probe, r3) == 0.25);

  CHECK(tok::tokenize_one(SegmentMatrix(10, 10), v) == 0);
  CHECK(tok::tokenize_one(r3, v) == 3);
  CHECK(tok::tokenize_one(probe, v) == 2);
  CHECK(v.size() == 4);
}

TEST_CASE("empty vocabulary state and dimension errors") {
  tok::TokenVocabulary v(4, 4, 0.3);
  CHECK(v.size() == 1);
  CHECK_THROWS_AS(v.lookup(SegmentMatrix(5, 4)), InvalidArgument);
  CHECK_THROWS_AS(tok::TokenVocabulary(4, 4, 0.0), InvalidArgument);
  CHECK_THROWS_AS(tok::TokenVocabulary(4, 4, 1.5), InvalidArgument);
}

TEST_CASE("build and tokenize agree with the brute-force oracle") {
  for (double theta : {0.3, 0.5, 1.0}) {
    CAPTURE(theta);
    const auto stream = random_stream(17, 400);
    const auto probes = random_stream(99, 300);

    std::vector<TokenId> ids;
    const auto v = tok::build_vocabulary(stream, 10, 10, theta, &ids);
    std::vector<int> want_ids;
    const auto ref = oracle::build(stream, 10, 10, theta, &want_ids);

    REQUIRE(v.size() == ref.reps.size());
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(v.reps()[i] == ref.reps[i]);
    CHECK(std::vector<int>(ids.begin(), ids.end()) == want_ids);

    const auto again = tok::tokenize(stream, v);
    CHECK(again == ids);
    for (const auto& p : probes) CHECK(tok::tokenize_one(p, v) == oracle::tokenize(p, ref));
  }
}

TEST_CASE("representatives are pairwise below the threshold") {
  for (double theta : {0.3, 0.5, 1.0}) {
    const auto v = tok::build_vocabulary(random_stream(23, 500), 10, 10, theta);
    for (std::size_t i = 0; i < v.size(); ++i)
      for (std::size_t j = i + 1; j < v.size(); ++j) CHECK(oracle::jaccard(v.reps()[i], v.reps()[j]) < theta);
  }
}

TEST_CASE("memoized lookups equal fresh scans") {
  const auto stream = random_stream(31, 300);
  auto v = tok::build_vocabulary(stream, 10, 10, 0.3);
  CHECK(v.memo_size() > 0);
  const auto probes = random_stream(32, 200);
  std::vector<TokenId> before;
  for (const auto& p : probes) before.push_back(v.lookup(p));
  v.memoize(probes);
  for (std::size_t i = 0; i < probes.size(); ++i) CHECK(v.lookup(probes[i]) == before[i]);

  // Inserting a representative invalidates the memo.
  SegmentMatrix novel(10, 10);
  for (int c = 0; c < 10; ++c) novel.set(9, c);
  for (int c = 0; c < 10; ++c) novel.set(8, c);
  const auto id = v.assign_or_insert(novel);
  if (static_cast<std::size_t>(id) + 1 == v.size()) CHECK(v.memo_size() == 0);
  CHECK(v.lookup(novel) == id);
}

TEST_CASE("first_match and best_match semantics") {
  tok::TokenVocabulary v(10, 10, 0.3);
  v.assign_or_insert(cells(10, 10, {0, 1}));
  v.assign_or_insert(cells(10, 10, {2, 3}));
  const auto probe = cells(10, 10, {1, 2, 3});
  // jaccard 1/4 with rep 1 and 2/3 with rep 2.
  CHECK(v.first_match(probe) == 2);
  CHECK(v.best_match(probe) == 2);
  CHECK(v.first_match(cells(10, 10, {77})) == -1);
  CHECK(v.best_match(cells(10, 10, {77})) == 0);
}

TEST_CASE("vocabulary save and load round-trip") {
  const auto v = tok::build_vocabulary(random_stream(41, 200), 10, 10, 0.5);
  const auto path = std::filesystem::temp_directory_path() / "trajsv_test_vocab.bin";
  v.save(path);
  const auto w = tok::TokenVocabulary::load(path);
  CHECK(w == v);
  const auto probes = random_stream(42, 100);
  CHECK(tok::tokenize(probes, w) == tok::tokenize(probes, v));
  std::filesystem::remove(path);
  CHECK_THROWS_AS(tok::TokenVocabulary::load(path), DataError);
}
