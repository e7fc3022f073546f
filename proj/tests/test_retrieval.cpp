#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "trajsv/error.hpp"
#include "trajsv/hnsw.hpp"
#include "trajsv/retrieval.hpp"

using namespace trajsv;
using namespace trajsv::retrieval;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t dim) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> v(dim);
  for (auto& x : v) x = n(rng);
  return v;
}

EmbeddingDb random_db(std::size_t count, std::size_t dim, std::uint64_t seed) {
  EmbeddingDb db(dim, Metric::cosine);
  Rng rng(seed);
  for (std::size_t i = 0; i < count; ++i) db.add("v" + std::to_string(i), random_vec(rng, dim));
  return db;
}

double recall_at_1(const AnnIndex& index, const EmbeddingDb& db, std::size_t queries, std::uint64_t seed,
                   std::size_t ef) {
  Rng rng(seed);
  std::size_t hits = 0;
  for (std::size_t q = 0; q < queries; ++q) {
    const auto v = random_vec(rng, db.dim());
    hits += index.query(v, 1, ef).front().index == exact_topk(db, v, 1).front().index;
  }
  return static_cast<double>(hits) / static_cast<double>(queries);
}

}  // namespace

TEST_CASE("exact_topk on hand-set 2-D vectors") {
  EmbeddingDb db(2, Metric::cosine);
  db.add("east", std::vector<double>{1, 0});
  db.add("north", std::vector<double>{0, 2});
  db.add("northeast", std::vector<double>{3, 3});
  db.add("west", std::vector<double>{-1, 0});
  db.add("steep", std::vector<double>{1, 2});
  const std::vector<double> q{2, 1};
  // cosines with (2,1)/sqrt5: east 2/sqrt5, north 1/sqrt5, northeast 3/sqrt10, west -2/sqrt5, steep 4/5.
  const auto hits = exact_topk(db, q, 5);
  REQUIRE(hits.size() == 5);
  const std::vector<std::string> order{"northeast", "east", "steep", "north", "west"};
  for (std::size_t i = 0; i < 5; ++i) CHECK(hits[i].id == order[i]);
  CHECK(hits[0].similarity == doctest::Approx(3.0 / std::sqrt(10.0)).epsilon(1e-15));
  CHECK(hits[1].similarity == doctest::Approx(2.0 / std::sqrt(5.0)).epsilon(1e-15));
  CHECK(hits[2].similarity == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(hits[4].similarity == doctest::Approx(-2.0 / std::sqrt(5.0)).epsilon(1e-15));
  CHECK(exact_rank(db, q, 2) == 1);
  CHECK(exact_rank(db, q, 3) == 5);
}

TEST_CASE("exact_topk basics") {
  auto db = random_db(20, 8, 1);
  const auto v = db.vector(7);
  const std::vector<double> q(v.begin(), v.end());
  const auto hits = exact_topk(db, q, 3);
  CHECK(hits.front().id == "v7");
  CHECK(hits.front().similarity == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(exact_topk(db, q, 100).size() == 20);
  CHECK_THROWS_AS(exact_topk(db, std::vector<double>(7, 1.0), 1), InvalidArgument);
}

TEST_CASE("ties keep insertion order") {
  EmbeddingDb db(2, Metric::dot);
  db.add("a", std::vector<double>{1, 1});
  db.add("b", std::vector<double>{2, 0});
  db.add("c", std::vector<double>{0, 2});
  const auto hits = exact_topk(db, std::vector<double>{1, 1}, 3);
  CHECK(hits[0].id == "a");
  CHECK(hits[1].id == "b");
  CHECK(hits[2].id == "c");
  CHECK(exact_rank(db, std::vector<double>{1, 1}, 2) == 3);
}

TEST_CASE("database invariants and persistence") {
  EmbeddingDb db(3, Metric::cosine);
  db.add("x", std::vector<double>{3, 0, 4});
  CHECK_THROWS_AS(db.add("x", std::vector<double>{1, 0, 0}), InvalidArgument);
  CHECK_THROWS_AS(db.add("y", std::vector<double>{1, 0}), InvalidArgument);
  CHECK(db.vector(0)[0] == doctest::Approx(0.6).epsilon(1e-15));

  const auto big = random_db(30, 5, 2);
  const auto stem = std::filesystem::temp_directory_path() / "trajsv_test_db";
  big.save(stem);
  const auto loaded = EmbeddingDb::load(stem);
  CHECK(loaded.ids() == big.ids());
  for (std::size_t i = 0; i < big.size(); ++i) {
    const auto a = big.vector(i), b = loaded.vector(i);
    CHECK(std::equal(a.begin(), a.end(), b.begin()));
  }
  std::filesystem::remove(stem.string() + ".ckpt");
  std::filesystem::remove(stem.string() + ".ids.json");
}

TEST_CASE("ann examples") {
  SUBCASE("single entry") {
    EmbeddingDb db(4, Metric::cosine);
    db.add("only", std::vector<double>{1, 2, 3, 4});
    const auto index = AnnIndex::build(db, AnnParams{});
    const auto hits = index.query(std::vector<double>{-1, 0, 0, 0}, 1);
    REQUIRE(hits.size() == 1);
    CHECK(hits[0].id == "only");
  }
  SUBCASE("query before build") {
    AnnIndex index;
    CHECK_FALSE(index.built());
    CHECK_THROWS_AS(index.query(std::vector<double>{1, 0}, 1, 4), StateError);
  }
  SUBCASE("ef below k is rejected") {
    const auto index = AnnIndex::build(random_db(10, 4, 3), AnnParams{});
    CHECK_THROWS_AS(index.query(std::vector<double>{1, 0, 0, 0}, 5, 4), InvalidArgument);
    CHECK_THROWS_AS(index.query(std::vector<double>{1, 0, 0, 0}, 0, 4), InvalidArgument);
  }
}

TEST_CASE("ann recall on 1000 random 128-d vectors") {
  const auto db = random_db(1000, 128, 5);
  const auto index = AnnIndex::build(db, AnnParams{});
  CHECK(recall_at_1(index, db, 200, 77, 64) >= 0.99);
}

TEST_CASE("ann graph structure") {
  const auto db = random_db(400, 16, 6);
  AnnParams params;
  params.M = 8;
  params.ef_construction = 64;
  const auto index = AnnIndex::build(db, params);
  std::vector<char> seen(db.size(), 0);
  std::vector<std::size_t> frontier{index.entry_point()};
  seen[index.entry_point()] = 1;
  // Breadth-first over base-level links from the entry point.
  while (!frontier.empty()) {
    const auto node = frontier.back();
    frontier.pop_back();
    for (const auto nb : index.neighbors(node, 0)) {
      if (!seen[nb]) {
        seen[nb] = 1;
        frontier.push_back(nb);
      }
    }
  }
  CHECK(std::count(seen.begin(), seen.end(), 1) == static_cast<long>(db.size()));
  for (std::size_t n = 0; n < db.size(); ++n) {
    for (int l = 0; l <= index.level_of(n); ++l) {
      const auto& links = index.neighbors(n, l);
      CHECK(links.size() <= (l == 0 ? 2 * params.M : params.M));
      CHECK(std::set<std::uint32_t>(links.begin(), links.end()).size() == links.size());
      CHECK(std::find(links.begin(), links.end(), n) == links.end());
    }
  }
  CHECK(index.level_of(index.entry_point()) == index.max_level());
}

TEST_CASE("ann results are unique db ids in non-increasing similarity") {
  const auto db = random_db(300, 12, 7);
  const auto index = AnnIndex::build(db, AnnParams{});
  Rng rng(8);
  for (int q = 0; q < 30; ++q) {
    const auto hits = index.query(random_vec(rng, 12), 20, 40);
    CHECK(hits.size() == 20);
    std::set<std::string> ids;
    for (std::size_t i = 0; i < hits.size(); ++i) {
      ids.insert(hits[i].id);
      CHECK(db.ids()[hits[i].index] == hits[i].id);
      if (i > 0) CHECK(hits[i].similarity <= hits[i - 1].similarity);
    }
    CHECK(ids.size() == hits.size());
  }
}

TEST_CASE("recall does not fall as ef grows") {
  // Averaged over several builds so single-query noise cancels.
  const std::vector<std::size_t> efs{1, 4, 16, 64};
  std::vector<double> mean(efs.size(), 0.0);
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const auto db = random_db(500, 32, 100 + seed);
    AnnParams params;
    params.M = 4;
    params.ef_construction = 16;
    params.seed = seed;
    const auto index = AnnIndex::build(db, params);
    for (std::size_t i = 0; i < efs.size(); ++i) mean[i] += recall_at_1(index, db, 100, 200 + seed, efs[i]) / 4.0;
  }
  for (std::size_t i = 1; i < efs.size(); ++i) CHECK(mean[i] >= mean[i - 1]);
  CHECK(mean.back() > mean.front());
}

TEST_CASE("ann build is deterministic and survives save/load") {
  const auto db = random_db(200, 10, 9);
  const auto a = AnnIndex::build(db, AnnParams{});
  const auto b = AnnIndex::build(db, AnnParams{});
  const auto path = std::filesystem::temp_directory_path() / "trajsv_test.hnsw";
  a.save(path);
  const auto c = AnnIndex::load(path);
  CHECK(c.params().M == a.params().M);
  CHECK(c.entry_point() == a.entry_point());
  Rng rng(10);
  for (int q = 0; q < 20; ++q) {
    const auto v = random_vec(rng, 10);
    const auto ha = a.query(v, 5), hb = b.query(v, 5), hc = c.query(v, 5);
    for (std::size_t i = 0; i < 5; ++i) {
      CHECK(ha[i].index == hb[i].index);
      CHECK(ha[i].index == hc[i].index);
      CHECK(ha[i].similarity == hc[i].similarity);
    }
  }
  std::filesystem::resize_file(path, 40);
  CHECK_THROWS_AS(AnnIndex::load(path), DataError);
  std::filesystem::remove(path);
}
