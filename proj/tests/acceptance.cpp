// Acceptance run: one PASS/FAIL line per criterion, exit 0 only if all pass.
// Criterion 5 trains the desk model through the CLI and takes several
// minutes; criterion 3 reuses its trained checkpoint.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>

#include <json.hpp>

#include "oracles.hpp"
#include "trajsv/config.hpp"
#include "trajsv/crnet.hpp"
#include "trajsv/dataset_io.hpp"
#include "trajsv/diagnostics.hpp"
#include "trajsv/hnsw.hpp"
#include "trajsv/objective.hpp"
#include "trajsv/tokenizer.hpp"
#include "trajsv/vrnet.hpp"

namespace fs = std::filesystem;
using namespace trajsv;
using tensor::Matrix;
using tensor::Tensor;
using Json = nlohmann::json;

namespace {

const std::string kCli = TRAJSV_CLI_PATH;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", x);
  return buf;
}

void cli(const std::string& args) {
  const std::string cmd = "\"" + kCli + "\" " + args + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) throw std::runtime_error("cli failed: " + args);
}

Matrix rand_matrix(Eigen::Index r, Eigen::Index c, Rng& rng) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = 2.0 * uniform01(rng) - 1.0;
  return m;
}

Matrix permute_rows(const Matrix& x, const std::vector<int>& perm) {
  Matrix out(x.rows(), x.cols());
  for (std::size_t i = 0; i < perm.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(perm[i]);
  return out;
}

std::vector<Json> g_reports;  // every evaluation report, for criterion 6

Json evaluate(const std::string& args, const fs::path& out) {
  cli(args + " --out " + out.string());
  auto j = Json::parse(io::read_text(out));
  g_reports.push_back(j);
  return j;
}

// --- criteria --------------------------------------------------------------

Outcome gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  diag::ModelGradCheckOptions opt;
  opt.model = config::tiny_model(2, 3);
  opt.vocab_size = 5;
  opt.batch = 2;
  const auto report = diag::check_model_gradients(opt);
  const double secs = seconds_since(t0);
  return {report.max_rel_error < 1e-4 && secs < 60.0,
          "max rel error " + fmt(report.max_rel_error) + " over " + std::to_string(report.checked) +
              " entries, " + fmt(secs) + " s"};
}

Outcome tokenizer() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(2024);
  std::vector<geom::SegmentMatrix> stream;
  for (int i = 0; i < 500; ++i) stream.push_back(oracle::random_matrix(rng, 10, 10));
  bool ok = true;
  std::string sizes;
  for (double theta : {0.3, 0.5, 1.0}) {
    std::vector<tok::TokenId> ids;
    const auto v = tok::build_vocabulary(stream, 10, 10, theta, &ids);
    std::vector<int> want;
    const auto ref = oracle::build(stream, 10, 10, theta, &want);
    ok = ok && v.size() == ref.reps.size() && std::vector<int>(ids.begin(), ids.end()) == want;
    for (std::size_t i = 0; ok && i < v.size(); ++i) ok = v.reps()[i] == ref.reps[i];
    const auto again = tok::tokenize(stream, v);
    ok = ok && again == ids;
    for (const auto& m : stream) ok = ok && tok::tokenize_one(m, v) == oracle::tokenize(m, ref);
    for (std::size_t i = 0; i < v.size(); ++i)
      for (std::size_t j = i + 1; j < v.size(); ++j) ok = ok && oracle::jaccard(v.reps()[i], v.reps()[j]) < theta;
    sizes += " " + std::to_string(v.size());
  }
  const double secs = seconds_since(t0);
  return {ok && secs < 10.0, "vocab sizes" + sizes + ", " + fmt(secs) + " s"};
}

Outcome attention(const fs::path& checkpoint) {
  std::string meta;
  const auto trained = tensor::ParamStore::load(checkpoint, &meta);
  const auto mj = Json::parse(meta);
  const auto mcfg = config::model_from_json(config::Json::parse(mj.at("model").dump()));
  const auto vocab_size = mj.at("vocab_size").get<std::size_t>();
  const auto& cr = mcfg.crnet;
  const int m = cr.m;

  Rng rng(33);
  std::vector<int> tokens(static_cast<std::size_t>(m));
  for (auto& t : tokens) t = static_cast<int>(uniform_index(rng, vocab_size));
  const Matrix visual = rand_matrix(1, cr.d4, rng);

  auto zeroed = trained.clone();  // copies share nodes
  zeroed.at("crnet.pos_embed").mutable_value().setZero();
  const Matrix x = crnet::embed_segments(tokens, zeroed, cr, {}).value();
  const Matrix base_attn = crnet::multi_head_self_attention(Tensor::constant(x), zeroed, cr, 0).value();
  const Matrix base_zero = crnet::encode_clips(tokens, visual, zeroed, cr, {}).value();
  const Matrix base_trained = crnet::encode_clips(tokens, visual, trained, cr, {}).value();

  std::vector<int> perm(static_cast<std::size_t>(m));
  std::iota(perm.begin(), perm.end(), 0);
  double equi = 0.0, moved = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    std::shuffle(perm.begin(), perm.end(), rng);
    const Matrix attn =
        crnet::multi_head_self_attention(Tensor::constant(permute_rows(x, perm)), zeroed, cr, 0).value();
    equi = std::max(equi, (attn - permute_rows(base_attn, perm)).cwiseAbs().maxCoeff());
    std::vector<int> ptok(tokens.size());
    for (std::size_t i = 0; i < ptok.size(); ++i) ptok[i] = tokens[static_cast<std::size_t>(perm[i])];
    equi = std::max(equi, (crnet::encode_clips(ptok, visual, zeroed, cr, {}).value() - base_zero).cwiseAbs().maxCoeff());
    moved = std::max(moved, (crnet::encode_clips(ptok, visual, trained, cr, {}).value() - base_trained).norm());
  }

  const int n = mcfg.vrnet.n;
  const Matrix clips = rand_matrix(n, mcfg.vrnet.d5, rng);
  const Matrix base_video = vrnet::video_embedding(Tensor::constant(clips), trained, mcfg.vrnet).value();
  std::vector<int> cperm(static_cast<std::size_t>(n));
  std::iota(cperm.begin(), cperm.end(), 0);
  double inv = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    std::shuffle(cperm.begin(), cperm.end(), rng);
    const Matrix v = vrnet::video_embedding(Tensor::constant(permute_rows(clips, cperm)), trained, mcfg.vrnet).value();
    inv = std::max(inv, (v - base_video).cwiseAbs().maxCoeff());
  }
  return {equi < 1e-9 && moved > 1e-6 && inv < 1e-9,
          "zeroed-position deviation " + fmt(equi) + ", trained-position max shift " + fmt(moved) +
              ", video deviation " + fmt(inv)};
}

Outcome losses() {
  using namespace objective;
  Rng rng(44);
  const EmbeddingBatch batch{Tensor::constant(rand_matrix(8, 6, rng)), Tensor::constant(rand_matrix(8, 6, rng)),
                             Tensor::constant(rand_matrix(8, 6, rng))};
  LossConfig ab;
  ab.alpha = 1.0;
  ab.beta = 0.0;
  const double d1 = std::abs(triple_loss(batch, ab).item() - pair_loss(batch.anchor, batch.intra, ab).item());

  LossConfig unit;
  unit.tau = 1.0;
  const Tensor e = Tensor::constant(Matrix::Identity(2, 2));
  const double closed = pair_loss(e, e, unit).item();

  const LossConfig def;
  const double base = triple_loss(batch, def).item();
  const EmbeddingBatch scaled{Tensor::constant(7.5 * batch.anchor.value()), Tensor::constant(0.02 * batch.intra.value()),
                              Tensor::constant(300.0 * batch.inter.value())};
  const double d3 = std::abs(triple_loss(scaled, def).item() - base);
  return {d1 <= 1e-12 && std::abs(closed - 0.6266) <= 1e-3 && d3 <= 1e-10,
          "alpha=1 beta=0 gap " + fmt(d1) + ", orthonormal pair " + fmt(closed) + ", rescale gap " + fmt(d3)};
}

Outcome retrieval_experiment(const fs::path& work, fs::path& trained_ckpt) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::string g = "--preset desk ";
  const auto data = (work / "data").string();
  const auto vocab = (work / "vocab.json").string();
  cli(g + "generate --out " + data);
  cli(g + "tokenize --data " + data + " --out " + vocab);
  cli(g + "train --init-only --data " + data + " --vocab " + vocab + " --out " + (work / "init").string());
  cli(g + "train --data " + data + " --vocab " + vocab + " --out " + (work / "trained").string());
  trained_ckpt = work / "trained" / "model.ckpt";

  const auto common = " --data " + data + " --vocab " + vocab + " --checkpoint ";
  const std::string deltas = " --deltas 0.5,0.55,0.6";
  const auto untrained = evaluate(g + "evaluate" + common + (work / "init/model.ckpt").string() + deltas,
                                  work / "eval_untrained.json");
  const auto trained =
      evaluate(g + "evaluate" + common + trained_ckpt.string() + deltas, work / "eval_trained.json");
  const auto sanity =
      evaluate(g + "evaluate" + common + trained_ckpt.string() + " --deltas 0", work / "eval_zero.json");
  const double secs = seconds_since(t0);

  const auto train_manifest = Json::parse(io::read_text(work / "trained/train.json"));
  bool ok = trained["query_count"] == 40;
  std::ostringstream detail;
  detail << "epochs " << train_manifest["epochs_run"] << " (best " << train_manifest["best_epoch"] << ");";
  for (const auto* key : {"0.5", "0.55", "0.6"}) {
    const double hr = trained["results"][key]["hr_at_1"], mrr = trained["results"][key]["mrr"];
    const double hr0 = untrained["results"][key]["hr_at_1"], mrr0 = untrained["results"][key]["mrr"];
    ok = ok && hr > hr0 && mrr > mrr0;
    detail << " d=" << key << " HR@1 " << fmt(hr) << " vs " << fmt(hr0) << ", MRR " << fmt(mrr) << " vs "
           << fmt(mrr0) << ";";
  }
  const double hr05 = trained["results"]["0.5"]["hr_at_1"];
  const double hr_zero = sanity["results"]["0"]["hr_at_1"];
  ok = ok && hr05 >= 0.25 && hr_zero == 1.0 && secs < 1800.0;
  detail << " d=0 HR@1 " << fmt(hr_zero) << ", " << fmt(secs) << " s";
  return {ok, detail.str()};
}

Outcome index_fidelity() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(66);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto vec = [&] {
    std::vector<double> v(128);
    for (auto& x : v) x = normal(rng);
    return v;
  };
  retrieval::EmbeddingDb db(128, retrieval::Metric::cosine);
  for (int i = 0; i < 1000; ++i) db.add("e" + std::to_string(i), vec());
  const auto index = retrieval::AnnIndex::build(db, retrieval::AnnParams{});
  int hits = 0;
  for (int q = 0; q < 200; ++q) {
    const auto v = vec();
    hits += index.query(v, 1, 64).front().index == retrieval::exact_topk(db, v, 1).front().index;
  }
  const double recall = hits / 200.0;
  const double secs = seconds_since(t0);
  bool ordered = !g_reports.empty();
  for (const auto& r : g_reports)
    for (const auto& [key, res] : r["results"].items()) ordered = ordered && res["mrr"] >= res["hr_at_1"];
  return {recall >= 0.99 && secs < 60.0 && ordered,
          "recall@1 " + fmt(recall) + " at ef 64, " + fmt(secs) + " s; MRR >= HR@1 in " +
              std::to_string(g_reports.size()) + " reports: " + (ordered ? "yes" : "no")};
}

Outcome determinism(const fs::path& work) {
  const std::string g = "--preset tiny --deterministic --seed 21 ";
  auto pipeline = [&](const fs::path& dir) {
    const auto data = (dir / "data").string(), vocab = (dir / "vocab.json").string();
    cli(g + "generate --videos 24 --out " + data);
    cli(g + "tokenize --data " + data + " --out " + vocab);
    cli(g + "train --data " + data + " --vocab " + vocab + " --out " + (dir / "model").string());
    evaluate(g + "evaluate --data " + data + " --vocab " + vocab + " --checkpoint " +
                 (dir / "model/model.ckpt").string(),
             dir / "eval.json");
  };
  pipeline(work / "a");
  pipeline(work / "b");
  std::size_t compared = 0;
  std::string mismatch;
  for (const auto& entry : fs::recursive_directory_iterator(work / "a")) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), work / "a");
    const auto other = work / "b" / rel;
    if (!fs::exists(other) || io::read_text(entry.path()) != io::read_text(other)) mismatch += " " + rel.string();
    ++compared;
  }
  return {compared > 0 && mismatch.empty(),
          std::to_string(compared) + " artifacts compared" + (mismatch.empty() ? "" : ", differ:" + mismatch)};
}

}  // namespace

int main() {
  const auto work = fs::temp_directory_path() / "trajsv_acceptance";
  fs::remove_all(work);
  fs::create_directories(work);

  std::vector<Outcome> results(7);
  auto guard = [&](int idx, const std::function<Outcome()>& f) {
    try {
      results[static_cast<std::size_t>(idx)] = f();
    } catch (const std::exception& e) {
      results[static_cast<std::size_t>(idx)] = {false, std::string("error: ") + e.what()};
    }
  };
  fs::path trained;
  guard(0, gradients);
  guard(1, tokenizer);
  guard(3, losses);
  guard(4, [&] { return retrieval_experiment(work / "desk", trained); });
  guard(2, [&] {
    if (trained.empty()) throw std::runtime_error("no trained checkpoint");
    return attention(trained);
  });
  guard(6, [&] { return determinism(work / "det"); });
  guard(5, index_fidelity);

  static const char* kNames[] = {"gradient correctness", "tokenizer oracle equivalence", "attention structure",
                                 "loss identities",      "desk-scale retrieval",         "index fidelity",
                                 "determinism"};
  bool all = true;
  for (std::size_t i = 0; i < results.size(); ++i) {
    std::printf("criterion %zu %s: %s (%s)\n", i + 1, kNames[i], results[i].pass ? "PASS" : "FAIL",
                results[i].detail.c_str());
    all = all && results[i].pass;
  }
  fs::remove_all(work);
  return all ? 0 : 1;
}
