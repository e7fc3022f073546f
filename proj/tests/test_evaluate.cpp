#include <doctest.h>

#include <filesystem>

#include <json.hpp>

#include "trajsv/config.hpp"
#include "trajsv/dataset_io.hpp"
#include "trajsv/error.hpp"
#include "trajsv/evaluate.hpp"
#include "trajsv/visual.hpp"

using namespace trajsv;
using namespace trajsv::eval;

namespace {

struct Setup {
  config::RunConfig cfg = config::preset("tiny");
  std::vector<geom::Video> train, test;
  tok::TokenVocabulary vocab;
  synth::SamplePool pool;

  Setup() {
    cfg.generate.n_videos = 20;
    auto videos = synth::generate_dataset(cfg.generate);
    visual::StubVisualProvider provider(static_cast<std::size_t>(cfg.model.crnet.d4), 3, cfg.tokenizer.field);
    visual::attach_visual(videos, provider);
    io::apply_split(videos, synth::make_split(videos, 0.8, 1), train, test);
    vocab = model::build_corpus_vocabulary(train, cfg.tokenizer, cfg.model.crnet.m);
    pool = synth::SamplePool(train);
  }
};

}  // namespace

TEST_CASE("rank arithmetic") {
  CHECK(reciprocal_rank(4) == 0.25);
  CHECK(reciprocal_rank(1) == 1.0);
  CHECK(reciprocal_rank(0) == 0.0);
  const auto r = summarize_ranks(0.5, {1, 4, 2, 1});
  CHECK(r.hr_at_1 == 0.5);
  CHECK(r.mrr == doctest::Approx((1 + 0.25 + 0.5 + 1) / 4.0).epsilon(1e-15));
}

TEST_CASE("MRR never falls below HR@1") {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::size_t> ranks(1 + uniform_index(rng, 30));
    for (auto& r : ranks) r = uniform_index(rng, 12);  // 0 = miss
    const auto s = summarize_ranks(0.5, ranks);
    CHECK(s.mrr >= s.hr_at_1);
    CHECK(s.hr_at_1 >= 0.0);
    CHECK(s.mrr <= 1.0);
  }
}

TEST_CASE("exact_ranks finds rows of the database") {
  tensor::Matrix db(3, 2);
  db << 1, 0, 0, 1, 1, 1;
  tensor::Matrix q(3, 2);
  q << 0.9, 0.1, 1, 1.2, 1, 0.95;
  const auto ranks = exact_ranks(db, q, retrieval::Metric::cosine);
  CHECK(ranks == std::vector<std::size_t>{1, 2, 1});
}

TEST_CASE("delta keys are shortest round-trip spellings") {
  CHECK(delta_key(0.5) == "0.5");
  CHECK(delta_key(0.55) == "0.55");
  CHECK(delta_key(0.0) == "0");
}

TEST_CASE("evaluate_retrieval on a tiny model") {
  Setup s;
  model::TrajSVModel m(s.cfg.model, s.vocab.size(), 4);
  EvalOptions opts;
  opts.deltas = {0.0, 0.5, 0.55, 0.6};
  const auto report = evaluate_retrieval(m, s.cfg.tokenizer, s.vocab, s.test, s.pool, opts, "abc");
  CHECK(report.query_count == s.test.size());
  CHECK(report.at(0.0).hr_at_1 == 1.0);
  CHECK(report.at(0.0).mrr == 1.0);
  for (const auto& r : report.results) CHECK(r.mrr >= r.hr_at_1);

  const auto j = nlohmann::json::parse(report.to_json());
  CHECK(j["checkpoint_id"] == "abc");
  CHECK(j["results"].contains("0.55"));
  CHECK(j["results"].size() == 4);

  // Reruns are identical.
  CHECK(evaluate_retrieval(m, s.cfg.tokenizer, s.vocab, s.test, s.pool, opts, "abc").to_json() == report.to_json());

  SUBCASE("single-video database") {
    const std::vector<geom::Video> one{s.test.front()};
    const auto r1 = evaluate_retrieval(m, s.cfg.tokenizer, s.vocab, one, s.pool, opts);
    for (const auto& r : r1.results) {
      CHECK(r.hr_at_1 == 1.0);
      CHECK(r.mrr == 1.0);
    }
  }
  SUBCASE("approximate search mode") {
    auto ann = opts;
    ann.use_exact = false;
    const auto ra = evaluate_retrieval(m, s.cfg.tokenizer, s.vocab, s.test, s.pool, ann);
    CHECK_FALSE(ra.exact);
    CHECK(ra.at(0.0).hr_at_1 == 1.0);
    for (const auto& r : ra.results) CHECK(r.mrr >= r.hr_at_1);
  }
  SUBCASE("empty inputs") {
    const std::vector<geom::Video> none;
    CHECK_THROWS_AS(evaluate_retrieval(m, s.cfg.tokenizer, s.vocab, none, s.pool, opts), ConfigError);
    auto no_deltas = opts;
    no_deltas.deltas.clear();
    CHECK_THROWS_AS(evaluate_retrieval(m, s.cfg.tokenizer, s.vocab, s.test, s.pool, no_deltas), ConfigError);
  }
}

TEST_CASE("file fingerprint") {
  const auto path = std::filesystem::temp_directory_path() / "trajsv_test_fp.txt";
  io::write_text(path, "");
  // FNV-1a 64 offset basis for empty input.
  CHECK(file_fingerprint(path) == "cbf29ce484222325");
  io::write_text(path, "a");
  CHECK(file_fingerprint(path) == "af63dc4c8601ec8c");
  std::filesystem::remove(path);
}
