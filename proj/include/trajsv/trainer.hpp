#pragma once

// Contrastive training loop: every anchor video is paired with an
// intra-clip and an inter-clip variant, the three views are encoded in one
// graph and the triple loss is minimized with momentum SGD. Validation loss
// (dropout off, fixed variants) drives early stopping.

#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "trajsv/model.hpp"
#include "trajsv/objective.hpp"
#include "trajsv/synth.hpp"

namespace trajsv::train {

using tensor::Matrix;
using tensor::ParamStore;

struct TrainConfig {
  int epochs = 100;
  int batch_size = 32;
  double lr = 0.01;
  double momentum = 0.7;
  int patience = 10;
  double noise_lo = 0.0;
  double noise_hi = 0.2;
  std::uint64_t seed = 1;
  double split_ratio = 0.8;
  double val_fraction = 0.2;  // of the training split
  int threads = 1;            // lanes for variant generation and tokenization

  void validate() const;
};

struct TrainState {
  int epoch = 0;
  std::map<std::string, Matrix> velocity;
  double best_val = std::numeric_limits<double>::infinity();
  int best_epoch = 0;
  int since_improvement = 0;
  Rng rng;
};

/// Patience rule on a loss that should decrease. update() returns true when
/// training should stop: `patience` consecutive epochs without a strict
/// improvement over the best value seen.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience);
  bool update(int epoch, double loss);
  int best_epoch() const { return best_epoch_; }
  double best() const { return best_; }
  bool improved() const { return since_ == 0; }
  int since_improvement() const { return since_; }

 private:
  int patience_;
  double best_ = std::numeric_limits<double>::infinity();
  int best_epoch_ = 0;
  int since_ = 0;
};

struct SgdReport {
  std::size_t updated = 0;
  std::vector<std::string> skipped;  // parameters without a gradient
};

/// v <- momentum * v + g;  p <- p - lr * v;  grads cleared.
SgdReport sgd_step(ParamStore& params, TrainState& state, double lr, double momentum);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct TrainResult {
  std::vector<EpochRecord> curve;
  int best_epoch = 0;
  double best_val = 0.0;
  bool stopped_early = false;
  ParamStore best_params;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Seeded split of the training videos into (fit, validation).
void split_validation(const std::vector<geom::Video>& videos, double val_fraction, std::uint64_t seed,
                      std::vector<geom::Video>& fit, std::vector<geom::Video>& val);

/// Consecutive index batches; a trailing singleton joins the previous batch.
std::vector<std::vector<std::size_t>> make_batches(std::size_t count, std::size_t batch_size);

/// Trains `model` in place and also returns a copy of the best parameters.
/// Throws ConfigError on an empty fit or validation set.
TrainResult train(model::TrajSVModel& model, const model::TokenizerConfig& tok, const tok::TokenVocabulary& vocab,
                  const std::vector<geom::Video>& fit_videos, const std::vector<geom::Video>& val_videos,
                  const synth::SamplePool& pool, const objective::LossConfig& loss, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

/// "epoch,train_loss,val_loss" with round-trip precision.
std::string loss_curve_csv(const std::vector<EpochRecord>& curve);

}  // namespace trajsv::train
