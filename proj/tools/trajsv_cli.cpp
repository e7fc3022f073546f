// trajsv: generate data, build the vocabulary, train, embed, index, query
// and evaluate.
//
// Exit codes: 0 ok, 1 usage or configuration, 2 data, 3 verification.
// Failures print one JSON line {"error": kind, "message": text} on stderr.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "trajsv/config.hpp"
#include "trajsv/diagnostics.hpp"
#include "trajsv/error.hpp"
#include "trajsv/evaluate.hpp"
#include "trajsv/hnsw.hpp"
#include "trajsv/visual.hpp"

namespace fs = std::filesystem;
using namespace trajsv;
using Json = nlohmann::ordered_json;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kVerify = 3 };

class VerificationFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::string config_path;
  std::string preset = "paper";
  std::optional<std::uint64_t> seed;
  int threads = 1;
  bool deterministic = false;
};

config::RunConfig effective_config(const Globals& g) {
  auto cfg = config::preset(g.preset);
  if (!g.config_path.empty()) cfg = config::load(g.config_path, cfg);
  if (g.seed) {
    cfg.generate.rng_seed = *g.seed;
    cfg.train.seed = *g.seed;
    cfg.eval.seed = *g.seed;
    cfg.index.seed = *g.seed;
  }
  cfg.train.threads = g.deterministic ? 1 : g.threads;
  cfg.sync();
  cfg.validate();
  return cfg;
}

fs::path dataset_file(const fs::path& dir) { return dir / "dataset.jsonl"; }
fs::path split_file(const fs::path& dir) { return dir / "split.json"; }

void write_json(const fs::path& path, const Json& j) { io::write_text(path, j.dump(2) + "\n"); }

void attach_visual(std::vector<geom::Video>& videos, const config::RunConfig& cfg) {
  const auto d4 = static_cast<std::size_t>(cfg.model.crnet.d4);
  if (cfg.visual.provider == "file") {
    visual::attach_visual(videos, visual::FileVisualProvider(cfg.visual.path, d4));
  } else {
    visual::attach_visual(videos, visual::StubVisualProvider(d4, cfg.visual.seed, cfg.tokenizer.field));
  }
}

struct Corpus {
  std::vector<geom::Video> train;
  std::vector<geom::Video> test;
};

Corpus load_corpus(const fs::path& dir, const config::RunConfig& cfg) {
  auto videos = io::read_dataset(dataset_file(dir), cfg.tokenizer.field);
  attach_visual(videos, cfg);
  Corpus c;
  io::apply_split(videos, io::read_split(split_file(dir)), c.train, c.test);
  return c;
}

std::string checkpoint_metadata(const config::RunConfig& cfg, std::size_t vocab_size) {
  Json j;
  j["kind"] = "trajsv-model";
  j["vocab_size"] = vocab_size;
  j["model"] = config::model_to_json(cfg.model);
  return j.dump();
}

model::TrajSVModel load_model(const fs::path& path, const tok::TokenVocabulary& vocab) {
  std::string meta;
  auto store = tensor::ParamStore::load(path, &meta);
  Json j;
  try {
    j = Json::parse(meta);
  } catch (const nlohmann::json::exception&) {
    throw DataError("checkpoint metadata is not JSON: " + path.string());
  }
  if (j.value("kind", "") != "trajsv-model") throw DataError("not a model checkpoint: " + path.string());
  const auto vocab_size = j.at("vocab_size").get<std::size_t>();
  if (vocab_size != vocab.size()) {
    throw DataError("checkpoint expects a vocabulary of " + std::to_string(vocab_size) + " tokens, got " +
                    std::to_string(vocab.size()));
  }
  return model::TrajSVModel(config::model_from_json(j.at("model")), vocab_size, std::move(store));
}

std::vector<double> parse_deltas(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("invalid delta '" + item + "'");
    }
  }
  if (out.empty()) throw ConfigError("--deltas is empty");
  return out;
}

// --- subcommands -----------------------------------------------------------

struct GenerateArgs {
  std::string out;
  std::optional<int> videos, clips, segments, players;
};

int run_generate(const Globals& g, const GenerateArgs& a) {
  auto cfg = effective_config(g);
  if (a.videos) cfg.generate.n_videos = *a.videos;
  if (a.clips) cfg.generate.clips_per_video = *a.clips;
  if (a.segments) cfg.generate.segs_per_clip = *a.segments;
  if (a.players) cfg.generate.players_per_clip = *a.players;
  cfg.validate();
  fs::create_directories(a.out);
  auto videos = synth::generate_dataset(cfg.generate);
  io::write_dataset(dataset_file(a.out), videos);
  const auto split = synth::make_split(videos, cfg.train.split_ratio, cfg.generate.rng_seed);
  io::write_split(split_file(a.out), split);
  attach_visual(videos, cfg);
  visual::write_visual_features(fs::path(a.out) / "visual.jsonl", videos);
  write_json(fs::path(a.out) / "generate.json",
             {{"videos", videos.size()}, {"train", split.train.size()}, {"test", split.test.size()},
              {"config", config::to_json(cfg)}});
  return kOk;
}

struct TokenizeArgs {
  std::string data, out;
};

int run_tokenize(const Globals& g, const TokenizeArgs& a) {
  const auto cfg = effective_config(g);
  const auto corpus = load_corpus(a.data, cfg);
  const int m = cfg.model.crnet.m;
  const auto mats = model::corpus_matrices(corpus.train, cfg.tokenizer, m);
  std::vector<tok::TokenId> ids;
  const auto vocab = tok::build_vocabulary(mats, cfg.tokenizer.field.grid_h(), cfg.tokenizer.field.grid_w(),
                                           cfg.tokenizer.jaccard_threshold, &ids);
  vocab.save(a.out);
  std::size_t pad = 0;
  for (const auto id : ids) pad += id == tok::kPadToken ? 1 : 0;
  write_json(a.out + ".stats.json",
             {{"matrices", mats.size()},
              {"vocab_size", vocab.size()},
              {"pad_fraction", mats.empty() ? 0.0 : static_cast<double>(pad) / static_cast<double>(mats.size())},
              {"grid", {vocab.grid_h(), vocab.grid_w()}},
              {"threshold", vocab.threshold()},
              {"config", config::to_json(cfg)}});
  return kOk;
}

struct TrainArgs {
  std::string data, vocab, out;
  std::optional<int> epochs;
  bool init_only = false;
};

int run_train(const Globals& g, const TrainArgs& a) {
  auto cfg = effective_config(g);
  if (a.epochs) {
    cfg.train.epochs = *a.epochs;
    cfg.train.patience = std::min(cfg.train.patience, cfg.train.epochs);
  }
  cfg.validate();
  const auto corpus = load_corpus(a.data, cfg);
  auto vocab = tok::TokenVocabulary::load(a.vocab);
  vocab.memoize(model::corpus_matrices(corpus.train, cfg.tokenizer, cfg.model.crnet.m));
  fs::create_directories(a.out);

  model::TrajSVModel net(cfg.model, vocab.size(), derive_seed(cfg.train.seed, 0x1417));
  Json manifest;
  manifest["config"] = config::to_json(cfg);
  manifest["vocab_size"] = vocab.size();
  manifest["parameters"] = net.params().scalar_count();
  if (a.init_only) {
    manifest["epochs_run"] = 0;
  } else {
    std::vector<geom::Video> fit, val;
    train::split_validation(corpus.train, cfg.train.val_fraction, cfg.train.seed, fit, val);
    const synth::SamplePool pool(corpus.train);
    const auto result = train::train(net, cfg.tokenizer, vocab, fit, val, pool, cfg.loss, cfg.train,
                                     [](const train::EpochRecord& r) {
                                       std::fprintf(stderr, "epoch %d train_loss %.6f val_loss %.6f\n", r.epoch,
                                                    r.train_loss, r.val_loss);
                                     });
    io::write_text(fs::path(a.out) / "loss.csv", train::loss_curve_csv(result.curve));
    manifest["epochs_run"] = result.curve.size();
    manifest["best_epoch"] = result.best_epoch;
    manifest["best_val_loss"] = result.best_val;
    manifest["stopped_early"] = result.stopped_early;
    manifest["fit_videos"] = fit.size();
    manifest["val_videos"] = val.size();
  }
  net.params().save(fs::path(a.out) / "model.ckpt", checkpoint_metadata(cfg, vocab.size()));
  write_json(fs::path(a.out) / "train.json", manifest);
  return kOk;
}

struct EmbedArgs {
  std::string data, vocab, checkpoint, out, split = "test";
};

int run_embed(const Globals& g, const EmbedArgs& a) {
  const auto cfg = effective_config(g);
  const auto vocab = tok::TokenVocabulary::load(a.vocab);
  const auto net = load_model(a.checkpoint, vocab);
  auto corpus = load_corpus(a.data, cfg);
  std::vector<geom::Video> videos;
  if (a.split == "train" || a.split == "all") videos = corpus.train;
  if (a.split == "test" || a.split == "all") videos.insert(videos.end(), corpus.test.begin(), corpus.test.end());
  std::vector<model::PreparedVideo> prepared;
  std::vector<std::string> ids;
  for (const auto& v : videos) {
    prepared.push_back(model::prepare_video(v, cfg.tokenizer, vocab, net.config()));
    ids.push_back(v.video_id);
  }
  retrieval::EmbeddingDb db(static_cast<std::size_t>(net.config().vrnet.d), cfg.eval.metric);
  db.add_rows(ids, net.embed(prepared));
  db.save(a.out);
  return kOk;
}

struct IndexArgs {
  std::string db, out;
};

int run_index(const Globals& g, const IndexArgs& a) {
  const auto cfg = effective_config(g);
  const auto db = retrieval::EmbeddingDb::load(a.db);
  retrieval::AnnIndex::build(db, cfg.index).save(a.out);
  return kOk;
}

struct QueryArgs {
  std::string vocab, checkpoint, video, index, db;
  std::size_t k = 10;
  std::optional<std::size_t> ef_search;
};

int run_query(const Globals& g, const QueryArgs& a) {
  const auto cfg = effective_config(g);
  if (a.index.empty() == a.db.empty()) throw ConfigError("query needs exactly one of --index or --db");
  const auto vocab = tok::TokenVocabulary::load(a.vocab);
  const auto net = load_model(a.checkpoint, vocab);
  auto videos = io::read_dataset(a.video, cfg.tokenizer.field);
  attach_visual(videos, cfg);
  std::vector<model::PreparedVideo> prepared;
  for (const auto& v : videos) prepared.push_back(model::prepare_video(v, cfg.tokenizer, vocab, net.config()));
  const auto emb = net.embed(prepared);

  std::optional<retrieval::AnnIndex> index;
  std::optional<retrieval::EmbeddingDb> db;
  if (!a.index.empty()) {
    index = retrieval::AnnIndex::load(a.index);
  } else {
    db = retrieval::EmbeddingDb::load(a.db);
  }
  for (std::size_t i = 0; i < videos.size(); ++i) {
    const std::span<const double> q(emb.data() + static_cast<tensor::Index>(i) * emb.cols(),
                                    static_cast<std::size_t>(emb.cols()));
    const auto hits = index ? index->query(q, a.k, std::max(a.k, a.ef_search.value_or(cfg.index.ef_search)))
                            : retrieval::exact_topk(*db, q, a.k);
    Json line;
    line["query"] = videos[i].video_id;
    line["hits"] = Json::array();
    for (const auto& h : hits) line["hits"].push_back({{"id", h.id}, {"similarity", h.similarity}});
    std::cout << line.dump() << '\n';
  }
  return kOk;
}

struct EvaluateArgs {
  std::string data, vocab, checkpoint, out, deltas;
  bool ann = false;
};

int run_evaluate(const Globals& g, const EvaluateArgs& a) {
  auto cfg = effective_config(g);
  if (!a.deltas.empty()) cfg.eval.deltas = parse_deltas(a.deltas);
  if (a.ann) cfg.eval.use_exact = false;
  cfg.validate();
  const auto vocab = tok::TokenVocabulary::load(a.vocab);
  const auto net = load_model(a.checkpoint, vocab);
  const auto corpus = load_corpus(a.data, cfg);
  const synth::SamplePool pool(corpus.train);
  const auto report = eval::evaluate_retrieval(net, cfg.tokenizer, vocab, corpus.test, pool, cfg.eval,
                                               eval::file_fingerprint(a.checkpoint));
  for (const auto& r : report.results) {
    if (!(r.mrr >= r.hr_at_1)) throw VerificationFailure("MRR below HR@1 at delta " + eval::delta_key(r.delta));
  }
  if (a.out.empty()) {
    std::cout << report.to_json();
  } else {
    io::write_text(a.out, report.to_json());
  }
  return kOk;
}

struct GradcheckArgs {
  std::string dims = "tiny";
  double tol = 1e-4;
};

int run_gradcheck(const Globals& g, const GradcheckArgs& a) {
  const auto cfg = effective_config(g);
  diag::ModelGradCheckOptions opt;
  opt.model = config::tiny_model();
  opt.seed = g.seed.value_or(1);
  opt.tol = a.tol;
  opt.loss = cfg.loss;
  const auto report = diag::check_model_gradients(opt);
  Json j = {{"dims", a.dims},
            {"passed", report.passed},
            {"max_rel_error", report.max_rel_error},
            {"worst_param", report.worst_param},
            {"checked", report.checked},
            {"tolerance", a.tol}};
  std::cout << j.dump() << '\n';
  if (!report.passed) throw VerificationFailure("gradient check failed: max relative error " +
                                                std::to_string(report.max_rel_error));
  return kOk;
}

void report_error(const char* kind, const std::string& message) {
  std::string flat = message;
  for (auto& ch : flat) {
    if (ch == '\n' || ch == '\r') ch = ' ';
  }
  std::cerr << nlohmann::json{{"error", kind}, {"message", flat}}.dump() << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"trajsv: trajectory-aware sports video retrieval"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config_path, "JSON run configuration overlaid on the preset");
  app.add_option("--preset", g.preset, "Base configuration: paper, desk or tiny")
      ->check(CLI::IsMember({"paper", "desk", "tiny"}))
      ->capture_default_str();
  app.add_option("--seed", g.seed, "Overrides the generator, training, evaluation and index seeds");
  app.add_option("--threads", g.threads, "Worker lanes for variant generation and tokenization")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app.add_flag("--deterministic", g.deterministic, "Force single-threaded execution");

  GenerateArgs gen;
  auto* c_gen = app.add_subcommand("generate", "Write a synthetic dataset, split manifest and visual features");
  c_gen->add_option("--out", gen.out, "Output directory")->required();
  c_gen->add_option("--videos", gen.videos, "Number of videos");
  c_gen->add_option("--clips", gen.clips, "Clips per video");
  c_gen->add_option("--segments", gen.segments, "Segments per clip");
  c_gen->add_option("--players", gen.players, "Players per clip (plus one ball)");

  TokenizeArgs tk;
  auto* c_tok = app.add_subcommand("tokenize", "Build the token vocabulary from the training split");
  c_tok->add_option("--data", tk.data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  c_tok->add_option("--out", tk.out, "Vocabulary file (statistics go to <out>.stats.json)")->required();

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "Train a model; writes model.ckpt, loss.csv and train.json");
  c_train->add_option("--data", tr.data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  c_train->add_option("--vocab", tr.vocab, "Vocabulary file")->required()->check(CLI::ExistingFile);
  c_train->add_option("--out", tr.out, "Output directory")->required();
  c_train->add_option("--epochs", tr.epochs, "Override the epoch budget");
  c_train->add_flag("--init-only", tr.init_only, "Write the randomly initialized model without training");

  EmbedArgs em;
  auto* c_embed = app.add_subcommand("embed", "Embed videos into an embedding database");
  c_embed->add_option("--data", em.data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  c_embed->add_option("--vocab", em.vocab, "Vocabulary file")->required()->check(CLI::ExistingFile);
  c_embed->add_option("--checkpoint", em.checkpoint, "Model checkpoint")->required()->check(CLI::ExistingFile);
  c_embed->add_option("--out", em.out, "Database stem (<out>.ckpt, <out>.ids.json)")->required();
  c_embed->add_option("--split", em.split, "Videos to embed: test, train or all")
      ->check(CLI::IsMember({"test", "train", "all"}))
      ->capture_default_str();

  IndexArgs ix;
  auto* c_index = app.add_subcommand("index", "Build an approximate nearest-neighbor index over a database");
  c_index->add_option("--db", ix.db, "Database stem")->required();
  c_index->add_option("--out", ix.out, "Index file")->required();

  QueryArgs qa;
  auto* c_query = app.add_subcommand("query", "Print the top-k database ids for each video in a JSONL file");
  c_query->add_option("--vocab", qa.vocab, "Vocabulary file")->required()->check(CLI::ExistingFile);
  c_query->add_option("--checkpoint", qa.checkpoint, "Model checkpoint")->required()->check(CLI::ExistingFile);
  c_query->add_option("--video", qa.video, "Query videos (dataset JSONL format)")->required()->check(CLI::ExistingFile);
  c_query->add_option("--index", qa.index, "Search this index");
  c_query->add_option("--db", qa.db, "Search this database exactly");
  c_query->add_option("--k", qa.k, "Number of results")->check(CLI::PositiveNumber)->capture_default_str();
  c_query->add_option("--ef-search", qa.ef_search, "Beam width for index search");

  EvaluateArgs ev;
  auto* c_eval = app.add_subcommand("evaluate", "HR@1 and MRR of noised test queries against the originals");
  c_eval->add_option("--data", ev.data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  c_eval->add_option("--vocab", ev.vocab, "Vocabulary file")->required()->check(CLI::ExistingFile);
  c_eval->add_option("--checkpoint", ev.checkpoint, "Model checkpoint")->required()->check(CLI::ExistingFile);
  c_eval->add_option("--deltas", ev.deltas, "Comma-separated noise rates, e.g. 0.5,0.55,0.6");
  c_eval->add_flag("--ann", ev.ann, "Rank with the approximate index instead of exact search");
  c_eval->add_option("--out", ev.out, "Report file (default: stdout)");

  GradcheckArgs gc;
  auto* c_grad = app.add_subcommand("gradcheck", "Compare model gradients against finite differences");
  c_grad->add_option("--dims", gc.dims, "Model size")->check(CLI::IsMember({"tiny"}))->capture_default_str();
  c_grad->add_option("--tol", gc.tol, "Maximum relative error")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::Error& e) {
    report_error("usage", e.what());
    return kUsage;
  }

  try {
    if (*c_gen) return run_generate(g, gen);
    if (*c_tok) return run_tokenize(g, tk);
    if (*c_train) return run_train(g, tr);
    if (*c_embed) return run_embed(g, em);
    if (*c_index) return run_index(g, ix);
    if (*c_query) return run_query(g, qa);
    if (*c_eval) return run_evaluate(g, ev);
    if (*c_grad) return run_gradcheck(g, gc);
  } catch (const ConfigError& e) {
    report_error("config", e.what());
    return kUsage;
  } catch (const VerificationFailure& e) {
    report_error("verification", e.what());
    return kVerify;
  } catch (const nlohmann::json::exception& e) {
    report_error("data", e.what());
    return kData;
  } catch (const std::exception& e) {
    report_error("data", e.what());
    return kData;
  }
  return kUsage;
}
