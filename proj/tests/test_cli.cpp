#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "trajsv/dataset_io.hpp"

namespace fs = std::filesystem;

namespace {

const std::string kCli = TRAJSV_CLI_PATH;

int run(const std::string& args) {
  const std::string cmd = "\"" + kCli + "\" " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& f) const { return (path / f).string(); }
};

}  // namespace

TEST_CASE("usage and config errors exit with 1") {
  CHECK(run("") == 1);
  CHECK(run("frobnicate") == 1);
  CHECK(run("--preset huge gradcheck") == 1);
  TempDir dir("trajsv_cli_cfg");
  trajsv::io::write_text(dir / "bad.json", R"({"train": {"epoch": 1}})");
  CHECK(run("--config " + (dir / "bad.json") + " gradcheck") == 1);
}

TEST_CASE("gradcheck passes") { CHECK(run("gradcheck") == 0); }

TEST_CASE("tiny pipeline end to end") {
  TempDir dir("trajsv_cli_pipe");
  const auto data = dir / "data";
  REQUIRE(run("--preset tiny generate --out " + data) == 0);
  CHECK(fs::exists(dir / "data/dataset.jsonl"));
  CHECK(fs::exists(dir / "data/split.json"));

  // Same seed, same bytes.
  REQUIRE(run("--preset tiny generate --out " + (dir / "again")) == 0);
  CHECK(trajsv::io::read_text(dir / "data/dataset.jsonl") == trajsv::io::read_text(dir / "again/dataset.jsonl"));

  REQUIRE(run("--preset tiny tokenize --data " + data + " --out " + (dir / "vocab.json")) == 0);
  REQUIRE(run("--preset tiny --deterministic train --data " + data + " --vocab " + (dir / "vocab.json") +
              " --out " + (dir / "model")) == 0);
  CHECK(fs::exists(dir / "model/model.ckpt"));
  CHECK(fs::exists(dir / "model/loss.csv"));

  const auto common = " --data " + data + " --vocab " + (dir / "vocab.json") + " --checkpoint " +
                      (dir / "model/model.ckpt");
  REQUIRE(run("--preset tiny evaluate" + common + " --deltas 0,0.5,0.55 --out " + (dir / "eval.json")) == 0);
  const auto report = nlohmann::json::parse(trajsv::io::read_text(dir / "eval.json"));
  CHECK(report["results"].contains("0"));
  CHECK(report["results"].contains("0.55"));
  CHECK(report["results"]["0"]["hr_at_1"] == 1.0);

  CHECK(run("--preset tiny evaluate" + common + " --deltas 0.5,abc") == 1);

  REQUIRE(run("--preset tiny embed --data " + data + " --vocab " + (dir / "vocab.json") + " --checkpoint " +
              (dir / "model/model.ckpt") + " --out " + (dir / "db")) == 0);
  REQUIRE(run("--preset tiny index --db " + (dir / "db") + " --out " + (dir / "db.hnsw")) == 0);
  CHECK(fs::exists(dir / "db.hnsw"));

  SUBCASE("damaged inputs exit with 2") {
    trajsv::io::write_text(dir / "model/model.ckpt", "garbage");
    CHECK(run("--preset tiny evaluate" + common) == 2);
    trajsv::io::write_text(dir / "data/dataset.jsonl", "{\"video_id\": 3}\n");
    CHECK(run("--preset tiny tokenize --data " + data + " --out " + (dir / "v2.json")) == 2);
  }
}
