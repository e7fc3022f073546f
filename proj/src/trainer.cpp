#include "trajsv/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <thread>

#include "trajsv/error.hpp"

namespace trajsv::train {

using model::PreparedVideo;
using tensor::Tensor;

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be positive");
  if (batch_size < 2) throw ConfigError("batch_size must be at least 2");
  if (!(lr > 0.0)) throw ConfigError("lr must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
  if (patience < 1 || patience > epochs) throw ConfigError("patience must lie in [1, epochs]");
  if (!(noise_lo >= 0.0 && noise_lo <= noise_hi && noise_hi <= 1.0)) {
    throw ConfigError("noise range must satisfy 0 <= lo <= hi <= 1");
  }
  if (!(split_ratio > 0.0 && split_ratio < 1.0)) throw ConfigError("split_ratio must lie in (0, 1)");
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw ConfigError("val_fraction must lie in (0, 1)");
  if (threads < 1) throw ConfigError("threads must be positive");
}

EarlyStopping::EarlyStopping(int patience) : patience_(patience) {
  if (patience < 1) throw InvalidArgument("patience must be positive");
}

bool EarlyStopping::update(int epoch, double loss) {
  if (loss < best_) {
    best_ = loss;
    best_epoch_ = epoch;
    since_ = 0;
    return false;
  }
  return ++since_ >= patience_;
}

SgdReport sgd_step(ParamStore& params, TrainState& state, double lr, double momentum) {
  SgdReport report;
  for (auto& [name, p] : params.items()) {
    if (!p.has_grad()) {
      report.skipped.push_back(name);
      continue;
    }
    auto [it, fresh] = state.velocity.try_emplace(name);
    if (fresh) it->second = Matrix::Zero(p.rows(), p.cols());
    Matrix& v = it->second;
    if (v.rows() != p.rows() || v.cols() != p.cols()) throw StateError("velocity shape drifted for '" + name + "'");
    v = momentum * v + p.grad();
    p.mutable_value() -= lr * v;
    p.clear_grad();
    ++report.updated;
  }
  return report;
}

void split_validation(const std::vector<geom::Video>& videos, double val_fraction, std::uint64_t seed,
                      std::vector<geom::Video>& fit, std::vector<geom::Video>& val) {
  std::vector<std::size_t> order(videos.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, 0x7a11d));
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_val = static_cast<std::size_t>(std::ceil(val_fraction * static_cast<double>(videos.size()) - 1e-9));
  std::vector<char> is_val(videos.size(), 0);
  for (std::size_t i = 0; i < n_val && i < order.size(); ++i) is_val[order[i]] = 1;
  fit.clear();
  val.clear();
  for (std::size_t i = 0; i < videos.size(); ++i) (is_val[i] ? val : fit).push_back(videos[i]);
}

std::vector<std::vector<std::size_t>> make_batches(std::size_t count, std::size_t batch_size) {
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t b = 0; b < count; b += batch_size) {
    std::vector<std::size_t> batch;
    for (std::size_t i = b; i < std::min(count, b + batch_size); ++i) batch.push_back(i);
    out.push_back(std::move(batch));
  }
  if (out.size() > 1 && out.back().size() == 1) {
    out[out.size() - 2].push_back(out.back().front());
    out.pop_back();
  }
  return out;
}

namespace {

struct Views {
  PreparedVideo intra;
  PreparedVideo inter;
};

// Variant generation depends only on (stream seed, item), so the result does
// not depend on how items are spread across lanes.
std::vector<Views> make_views(const std::vector<const geom::Video*>& videos, std::uint64_t stream,
                              const std::vector<std::size_t>& item_ids, const model::TokenizerConfig& tok,
                              const tok::TokenVocabulary& vocab, const model::ModelConfig& mcfg,
                              const synth::SamplePool& pool, const TrainConfig& cfg) {
  std::vector<Views> out(videos.size());
  auto work = [&](std::size_t i) {
    Rng rng(derive_seed(stream, item_ids[i]));
    const double u = uniform01(rng);
    const synth::NoiseRate delta(cfg.noise_lo + (cfg.noise_hi - cfg.noise_lo) * u);
    const auto v2 = synth::make_intra_variant(*videos[i], delta, pool, rng);
    const auto v3 = synth::make_inter_variant(*videos[i], delta, pool, rng);
    out[i].intra = model::prepare_video(v2, tok, vocab, mcfg);
    out[i].inter = model::prepare_video(v3, tok, vocab, mcfg);
  };
  const auto lanes = std::min<std::size_t>(static_cast<std::size_t>(cfg.threads), videos.size());
  if (lanes <= 1) {
    for (std::size_t i = 0; i < videos.size(); ++i) work(i);
    return out;
  }
  std::vector<std::thread> pool_threads;
  std::vector<std::exception_ptr> errors(lanes);
  for (std::size_t lane = 0; lane < lanes; ++lane) {
    pool_threads.emplace_back([&, lane] {
      try {
        for (std::size_t i = lane; i < videos.size(); i += lanes) work(i);
      } catch (...) {
        errors[lane] = std::current_exception();
      }
    });
  }
  for (auto& t : pool_threads) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

Tensor batch_loss(const model::TrajSVModel& model, const std::vector<const PreparedVideo*>& anchors,
                  const std::vector<Views>& views, const objective::LossConfig& loss,
                  const nn::ForwardContext& ctx) {
  std::vector<PreparedVideo> stacked;
  stacked.reserve(3 * anchors.size());
  for (const auto* a : anchors) stacked.push_back(*a);
  for (const auto& v : views) stacked.push_back(v.intra);
  for (const auto& v : views) stacked.push_back(v.inter);
  const auto b = static_cast<tensor::Index>(anchors.size());
  const Tensor emb = model.encode(stacked, ctx);
  const objective::EmbeddingBatch batch{tensor::slice_rows(emb, 0, b), tensor::slice_rows(emb, b, b),
                                        tensor::slice_rows(emb, 2 * b, b)};
  return objective::triple_loss(batch, loss);
}

}  // namespace

TrainResult train(model::TrajSVModel& model, const model::TokenizerConfig& tok, const tok::TokenVocabulary& vocab,
                  const std::vector<geom::Video>& fit_videos, const std::vector<geom::Video>& val_videos,
                  const synth::SamplePool& pool, const objective::LossConfig& loss, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
  cfg.validate();
  loss.validate();
  if (fit_videos.size() < 2) throw ConfigError("training needs at least two videos");
  if (val_videos.size() < 2) throw ConfigError("validation needs at least two videos");
  if (pool.empty()) throw ConfigError("training pool is empty");
  const auto& mcfg = model.config();
  const auto bs = static_cast<std::size_t>(cfg.batch_size);

  std::vector<PreparedVideo> anchors;
  anchors.reserve(fit_videos.size());
  for (const auto& v : fit_videos) anchors.push_back(model::prepare_video(v, tok, vocab, mcfg));

  // Validation views are drawn once from a fixed stream and reused every epoch.
  const auto val_batches = make_batches(val_videos.size(), bs);
  std::vector<PreparedVideo> val_anchors;
  for (const auto& v : val_videos) val_anchors.push_back(model::prepare_video(v, tok, vocab, mcfg));
  std::vector<Views> val_views;
  {
    std::vector<const geom::Video*> ptrs;
    std::vector<std::size_t> ids;
    for (std::size_t i = 0; i < val_videos.size(); ++i) {
      ptrs.push_back(&val_videos[i]);
      ids.push_back(i);
    }
    val_views = make_views(ptrs, derive_seed(cfg.seed, 0x7a1), ids, tok, vocab, mcfg, pool, cfg);
  }
  auto validation_loss = [&] {
    tensor::NoGradGuard no_grad;
    const nn::ForwardContext ctx;
    double total = 0.0;
    for (const auto& batch : val_batches) {
      std::vector<const PreparedVideo*> a;
      std::vector<Views> v;
      for (const auto i : batch) {
        a.push_back(&val_anchors[i]);
        v.push_back(val_views[i]);
      }
      total += batch_loss(model, a, v, loss, ctx).item();
    }
    return total / static_cast<double>(val_batches.size());
  };

  TrainState state;
  state.rng.seed(derive_seed(cfg.seed, 0xd50));
  TrainResult result;
  result.best_params = model.params().clone();
  EarlyStopping stopper(cfg.patience);

  std::vector<std::size_t> order(fit_videos.size());
  std::iota(order.begin(), order.end(), 0);
  for (state.epoch = 1; state.epoch <= cfg.epochs; ++state.epoch) {
    const auto epoch_seed = derive_seed(cfg.seed, 0x10000 + static_cast<std::uint64_t>(state.epoch));
    Rng shuffle_rng(derive_seed(epoch_seed, 0));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double train_total = 0.0;
    const auto batches = make_batches(order.size(), bs);
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      std::vector<const geom::Video*> vids;
      std::vector<const PreparedVideo*> a;
      std::vector<std::size_t> ids;
      for (const auto pos : batches[bi]) {
        vids.push_back(&fit_videos[order[pos]]);
        a.push_back(&anchors[order[pos]]);
        ids.push_back(pos);
      }
      const auto views = make_views(vids, derive_seed(epoch_seed, 1 + bi), ids, tok, vocab, mcfg, pool, cfg);
      const nn::ForwardContext ctx{true, &state.rng};
      const Tensor l = batch_loss(model, a, views, loss, ctx);
      train_total += l.item();
      tensor::backward(l);
      sgd_step(model.params(), state, cfg.lr, cfg.momentum);
    }

    EpochRecord rec{state.epoch, train_total / static_cast<double>(batches.size()), validation_loss()};
    result.curve.push_back(rec);
    if (on_epoch) on_epoch(rec);

    const bool stop = stopper.update(state.epoch, rec.val_loss);
    state.best_val = stopper.best();
    state.best_epoch = stopper.best_epoch();
    state.since_improvement = stopper.since_improvement();
    if (stopper.improved()) result.best_params = model.params().clone();
    if (stop) {
      result.stopped_early = true;
      break;
    }
  }
  result.best_epoch = state.best_epoch;
  result.best_val = state.best_val;
  model.params().assign_values(result.best_params);
  return result;
}

std::string loss_curve_csv(const std::vector<EpochRecord>& curve) {
  std::string out = "epoch,train_loss,val_loss\n";
  char line[128];
  for (const auto& r : curve) {
    std::snprintf(line, sizeof line, "%d,%.17g,%.17g\n", r.epoch, r.train_loss, r.val_loss);
    out += line;
  }
  return out;
}

}  // namespace trajsv::train
