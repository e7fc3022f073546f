#include "trajsv/config.hpp"

#include <set>
#include <utility>

#include "trajsv/dataset_io.hpp"
#include "trajsv/error.hpp"

namespace trajsv::config {

namespace {

template <typename E>
using Names = std::initializer_list<std::pair<E, const char*>>;

const Names<geom::RasterMode> kRaster = {{geom::RasterMode::supercover, "supercover"},
                                         {geom::RasterMode::points, "points"}};
const Names<crnet::FeatureMode> kFeatures = {{crnet::FeatureMode::both, "both"},
                                             {crnet::FeatureMode::trajectory, "trajectory"},
                                             {crnet::FeatureMode::visual, "visual"}};
const Names<vrnet::Pooling> kPooling = {{vrnet::Pooling::attention, "attention"}, {vrnet::Pooling::mean, "mean"}};
const Names<objective::Similarity> kSimilarity = {{objective::Similarity::cosine, "cosine"},
                                                  {objective::Similarity::dot, "dot"}};
const Names<objective::Denominator> kDenominator = {{objective::Denominator::standard, "standard"},
                                                    {objective::Denominator::literal, "literal"}};
const Names<objective::Reduction> kReduction = {{objective::Reduction::mean, "mean"},
                                                {objective::Reduction::sum, "sum"}};
const Names<objective::DropView> kDropView = {{objective::DropView::none, "none"},
                                              {objective::DropView::anchor, "anchor"},
                                              {objective::DropView::intra, "intra"},
                                              {objective::DropView::inter, "inter"}};

template <typename E>
const char* name_of(E value, Names<E> names) {
  for (const auto& [v, n] : names) {
    if (v == value) return n;
  }
  throw InvalidArgument("unnamed enum value");
}

template <typename E>
E value_of(const std::string& s, Names<E> names, const std::string& key) {
  for (const auto& [v, n] : names) {
    if (s == n) return v;
  }
  throw ConfigError("invalid value '" + s + "' for " + key);
}

// Reads known keys from one object and rejects whatever is left over.
class Section {
 public:
  Section(const Json& parent, const std::string& name) : name_(name) {
    const auto it = parent.find(name);
    if (it == parent.end()) return;
    if (!it->is_object()) throw ConfigError("config section '" + name + "' must be an object");
    j_ = &*it;
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_) return;
    const auto it = j_->find(key);
    if (it == j_->end()) return;
    try {
      out = it->template get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError("config key '" + name_ + "." + key + "' has the wrong type");
    }
  }

  template <typename E>
  void get_enum(const char* key, E& out, Names<E> names) {
    std::string s = name_of(out, names);
    get(key, s);
    out = value_of(s, names, name_ + "." + key);
  }

  void finish() const {
    if (!j_) return;
    for (const auto& [k, _] : j_->items()) {
      if (!seen_.count(k)) throw ConfigError("unknown config key '" + name_ + "." + k + "'");
    }
  }

 private:
  const Json* j_ = nullptr;
  std::string name_;
  std::set<std::string> seen_;
};

void read_crnet(Section& s, crnet::CRNetConfig& c) {
  s.get("d1", c.d1);
  s.get("d2", c.d2);
  s.get("d3", c.d3);
  s.get("d4", c.d4);
  s.get("m", c.m);
  s.get("heads", c.heads);
  s.get("layers", c.layers);
  s.get("dropout", c.dropout);
  s.get("pad_mask", c.pad_mask);
  s.get_enum("features", c.features, kFeatures);
}

void read_vrnet(Section& s, vrnet::VRNetConfig& v) {
  s.get("n", v.n);
  s.get("enc_dims", v.enc_dims);
  s.get("d", v.d);
  s.get("heads", v.heads);
  s.get_enum("pooling", v.pooling, kPooling);
}

Json crnet_json(const crnet::CRNetConfig& c) {
  return {{"d1", c.d1},           {"d2", c.d2},         {"d3", c.d3},
          {"d4", c.d4},           {"m", c.m},           {"heads", c.heads},
          {"layers", c.layers},   {"dropout", c.dropout}, {"pad_mask", c.pad_mask},
          {"features", name_of(c.features, kFeatures)}};
}

Json vrnet_json(const vrnet::VRNetConfig& v) {
  return {{"n", v.n}, {"enc_dims", v.enc_dims}, {"d", v.d}, {"heads", v.heads},
          {"pooling", name_of(v.pooling, kPooling)}};
}

}  // namespace

void VisualConfig::validate() const {
  if (provider != "stub" && provider != "file") throw ConfigError("visual.provider must be 'stub' or 'file'");
  if (provider == "file" && path.empty()) throw ConfigError("visual.path is required for the file provider");
}

void RunConfig::sync() {
  generate.field = tokenizer.field;
  generate.segment_len = tokenizer.segment_len;
  model.vrnet.d5 = model.crnet.d5();
  eval.ann = index;
}

void RunConfig::validate() const {
  tokenizer.validate();
  generate.validate();
  model.validate();
  loss.validate();
  train.validate();
  index.validate();
  visual.validate();
  if (eval.deltas.empty()) throw ConfigError("eval.deltas must not be empty");
  for (const double d : eval.deltas) {
    if (!(d >= 0.0 && d <= 1.0)) throw ConfigError("eval.deltas must lie in [0, 1]");
  }
}

Json model_to_json(const model::ModelConfig& cfg) {
  return {{"crnet", crnet_json(cfg.crnet)}, {"vrnet", vrnet_json(cfg.vrnet)}};
}

model::ModelConfig model_from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("model config must be an object");
  model::ModelConfig cfg;
  Section cr(j, "crnet");
  read_crnet(cr, cfg.crnet);
  cr.finish();
  Section vr(j, "vrnet");
  read_vrnet(vr, cfg.vrnet);
  vr.finish();
  for (const auto& [k, _] : j.items()) {
    if (k != "crnet" && k != "vrnet") throw ConfigError("unknown model config key '" + k + "'");
  }
  cfg.vrnet.d5 = cfg.crnet.d5();
  cfg.validate();
  return cfg;
}

Json to_json(const RunConfig& c) {
  Json j;
  const auto& f = c.tokenizer.field;
  j["field"] = {{"x_min", f.x_min}, {"x_max", f.x_max}, {"y_min", f.y_min}, {"y_max", f.y_max},
                {"cell_size", f.cell_size}};
  j["tokenizer"] = {{"segment_len", c.tokenizer.segment_len},
                    {"jaccard_threshold", c.tokenizer.jaccard_threshold},
                    {"raster", name_of(c.tokenizer.raster, kRaster)}};
  const auto& g = c.generate;
  j["generate"] = {{"videos", g.n_videos},     {"clips", g.clips_per_video},
                   {"segments", g.segs_per_clip}, {"players", g.players_per_clip},
                   {"seed", g.rng_seed},       {"step_std", g.step_std},
                   {"ball_speed_mult", g.ball_speed_mult}, {"sample_hz", g.sample_hz}};
  j["crnet"] = crnet_json(c.model.crnet);
  j["vrnet"] = vrnet_json(c.model.vrnet);
  const auto& l = c.loss;
  j["loss"] = {{"tau", l.tau},
               {"alpha", l.alpha},
               {"beta", l.beta},
               {"similarity", name_of(l.similarity, kSimilarity)},
               {"denominator", name_of(l.denominator, kDenominator)},
               {"reduction", name_of(l.reduction, kReduction)},
               {"drop_view", name_of(l.drop_view, kDropView)}};
  const auto& t = c.train;
  j["train"] = {{"epochs", t.epochs},       {"batch_size", t.batch_size}, {"lr", t.lr},
                {"momentum", t.momentum},   {"patience", t.patience},     {"noise_lo", t.noise_lo},
                {"noise_hi", t.noise_hi},   {"seed", t.seed},             {"split_ratio", t.split_ratio},
                {"val_fraction", t.val_fraction}};
  j["index"] = {{"M", c.index.M},
                {"ef_construction", c.index.ef_construction},
                {"ef_search", c.index.ef_search},
                {"seed", c.index.seed}};
  j["visual"] = {{"provider", c.visual.provider}, {"seed", c.visual.seed}, {"path", c.visual.path}};
  j["eval"] = {{"deltas", c.eval.deltas}, {"seed", c.eval.seed}, {"use_exact", c.eval.use_exact}};
  return j;
}

RunConfig from_json(const Json& j, RunConfig base) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  static const std::set<std::string> kSections = {"field", "tokenizer", "generate", "crnet", "vrnet",
                                                   "loss",  "train",     "index",    "visual", "eval"};
  for (const auto& [k, _] : j.items()) {
    if (!kSections.count(k)) throw ConfigError("unknown config section '" + k + "'");
  }
  RunConfig c = std::move(base);

  Section field(j, "field");
  auto& f = c.tokenizer.field;
  field.get("x_min", f.x_min);
  field.get("x_max", f.x_max);
  field.get("y_min", f.y_min);
  field.get("y_max", f.y_max);
  field.get("cell_size", f.cell_size);
  field.finish();

  Section tok(j, "tokenizer");
  tok.get("segment_len", c.tokenizer.segment_len);
  tok.get("jaccard_threshold", c.tokenizer.jaccard_threshold);
  tok.get_enum("raster", c.tokenizer.raster, kRaster);
  tok.finish();

  Section gen(j, "generate");
  auto& g = c.generate;
  gen.get("videos", g.n_videos);
  gen.get("clips", g.clips_per_video);
  gen.get("segments", g.segs_per_clip);
  gen.get("players", g.players_per_clip);
  gen.get("seed", g.rng_seed);
  gen.get("step_std", g.step_std);
  gen.get("ball_speed_mult", g.ball_speed_mult);
  gen.get("sample_hz", g.sample_hz);
  gen.finish();

  Section cr(j, "crnet");
  read_crnet(cr, c.model.crnet);
  cr.finish();
  Section vr(j, "vrnet");
  read_vrnet(vr, c.model.vrnet);
  vr.finish();

  Section loss(j, "loss");
  loss.get("tau", c.loss.tau);
  loss.get("alpha", c.loss.alpha);
  loss.get("beta", c.loss.beta);
  loss.get_enum("similarity", c.loss.similarity, kSimilarity);
  loss.get_enum("denominator", c.loss.denominator, kDenominator);
  loss.get_enum("reduction", c.loss.reduction, kReduction);
  loss.get_enum("drop_view", c.loss.drop_view, kDropView);
  loss.finish();

  Section tr(j, "train");
  auto& t = c.train;
  tr.get("epochs", t.epochs);
  tr.get("batch_size", t.batch_size);
  tr.get("lr", t.lr);
  tr.get("momentum", t.momentum);
  tr.get("patience", t.patience);
  tr.get("noise_lo", t.noise_lo);
  tr.get("noise_hi", t.noise_hi);
  tr.get("seed", t.seed);
  tr.get("split_ratio", t.split_ratio);
  tr.get("val_fraction", t.val_fraction);
  tr.finish();

  Section idx(j, "index");
  idx.get("M", c.index.M);
  idx.get("ef_construction", c.index.ef_construction);
  idx.get("ef_search", c.index.ef_search);
  idx.get("seed", c.index.seed);
  idx.finish();

  Section vis(j, "visual");
  vis.get("provider", c.visual.provider);
  vis.get("seed", c.visual.seed);
  vis.get("path", c.visual.path);
  vis.finish();

  Section ev(j, "eval");
  ev.get("deltas", c.eval.deltas);
  ev.get("seed", c.eval.seed);
  ev.get("use_exact", c.eval.use_exact);
  ev.finish();

  c.sync();
  c.validate();
  return c;
}

RunConfig load(const std::filesystem::path& path, RunConfig base) {
  Json j;
  try {
    j = Json::parse(io::read_text(path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed config " + path.string() + ": " + e.what());
  }
  return from_json(j, std::move(base));
}

RunConfig desk_preset() {
  RunConfig c;
  auto& cr = c.model.crnet;
  cr.d1 = 64;
  cr.d2 = 64;
  cr.d3 = 64;
  cr.d4 = 128;
  c.model.vrnet.enc_dims = {256, 256};
  c.model.vrnet.d = 128;
  c.sync();
  return c;
}

RunConfig preset(const std::string& name) {
  if (name == "paper") return RunConfig{};
  if (name == "desk") return desk_preset();
  if (name == "tiny") {
    RunConfig c;
    c.model = tiny_model();
    c.generate.n_videos = 12;
    c.generate.clips_per_video = 2;
    c.generate.segs_per_clip = 3;
    c.train.epochs = 3;
    c.train.patience = 3;
    c.train.batch_size = 4;
    c.sync();
    return c;
  }
  throw ConfigError("unknown preset '" + name + "'");
}

model::ModelConfig tiny_model(std::size_t n_clips, int m) {
  model::ModelConfig cfg;
  cfg.crnet.d1 = 8;
  cfg.crnet.d2 = 8;
  cfg.crnet.d3 = 8;
  cfg.crnet.d4 = 8;
  cfg.crnet.m = m;
  cfg.vrnet.n = static_cast<int>(n_clips);
  cfg.vrnet.d5 = cfg.crnet.d5();
  cfg.vrnet.enc_dims = {8, 8};
  cfg.vrnet.d = 8;
  return cfg;
}

}  // namespace trajsv::config
