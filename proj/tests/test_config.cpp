#include <doctest.h>

#include <filesystem>

#include "trajsv/config.hpp"
#include "trajsv/dataset_io.hpp"
#include "trajsv/error.hpp"

using namespace trajsv;
using namespace trajsv::config;

TEST_CASE("json round trip is a fixed point") {
  for (const auto* name : {"paper", "desk", "tiny"}) {
    const auto cfg = preset(name);
    const auto j = to_json(cfg);
    CHECK(to_json(from_json(j)).dump() == j.dump());
  }
}

TEST_CASE("overlay keeps unspecified defaults") {
  const auto cfg = from_json(Json::parse(R"({"train": {"epochs": 7, "patience": 5}, "loss": {"similarity": "dot"}})"));
  CHECK(cfg.train.epochs == 7);
  CHECK(cfg.train.batch_size == 32);
  CHECK(cfg.loss.similarity == objective::Similarity::dot);
  CHECK(cfg.loss.tau == 0.1);

  const auto desk = from_json(Json::parse(R"({"train": {"lr": 0.02}})"), desk_preset());
  CHECK(desk.model.crnet.d1 == 64);
  CHECK(desk.train.lr == 0.02);
}

TEST_CASE("malformed configs are rejected") {
  CHECK_THROWS_AS(from_json(Json::parse(R"({"trian": {}})")), ConfigError);
  CHECK_THROWS_AS(from_json(Json::parse(R"({"train": {"epoch": 3}})")), ConfigError);
  CHECK_THROWS_AS(from_json(Json::parse(R"({"train": {"epochs": "many"}})")), ConfigError);
  CHECK_THROWS_AS(from_json(Json::parse(R"({"loss": {"similarity": "euclid"}})")), ConfigError);
  CHECK_THROWS_AS(from_json(Json::parse(R"({"train": 3})")), ConfigError);
  CHECK_THROWS_AS(from_json(Json::parse("[]")), ConfigError);
  CHECK_THROWS_AS(preset("huge"), ConfigError);

  auto cfg = preset("paper");
  cfg.eval.deltas = {1.5};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = preset("paper");
  cfg.visual.provider = "file";
  CHECK_THROWS_AS(cfg.validate(), ConfigError);

  const auto path = std::filesystem::temp_directory_path() / "trajsv_bad_config.json";
  io::write_text(path, "{ not json");
  CHECK_THROWS_AS(load(path), ConfigError);
  std::filesystem::remove(path);
}

TEST_CASE("presets are valid and consistent") {
  for (const auto* name : {"paper", "desk", "tiny"}) {
    const auto cfg = preset(name);
    CHECK_NOTHROW(cfg.validate());
    CHECK(cfg.model.vrnet.d5 == cfg.model.crnet.d5());
  }
  const auto paper = preset("paper");
  CHECK(paper.model.crnet.d5() == 640);
  CHECK(paper.model.vrnet.d == 128);
  const auto tiny = preset("tiny");
  CHECK(tiny.model.crnet.d1 == 8);
  CHECK(tiny.model.crnet.m == 3);
  CHECK(tiny.model.vrnet.n == 2);
}

TEST_CASE("model json round trip") {
  const auto m = desk_preset().model;
  const auto j = model_to_json(m);
  CHECK(model_to_json(model_from_json(j)).dump() == j.dump());
  CHECK_THROWS_AS(model_from_json(Json::parse(R"({"crnet": {}, "extra": 1})")), ConfigError);
}
