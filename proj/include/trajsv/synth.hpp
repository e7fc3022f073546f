#pragma once

// Synthetic trajectory datasets and the noised variants used for training
// (intra-clip / inter-clip) and evaluation queries.

#include <cstdint>
#include <vector>

#include "trajsv/dataset_io.hpp"
#include "trajsv/geom.hpp"
#include "trajsv/rng.hpp"

namespace trajsv::synth {

struct GenConfig {
  int n_videos = 200;
  int clips_per_video = 16;
  int segs_per_clip = 16;
  int players_per_clip = 6;
  std::uint64_t rng_seed = 7;
  double step_std = 1.0;         // meters per sample, players
  double ball_speed_mult = 2.0;  // ball step std = step_std * ball_speed_mult
  double sample_hz = 5.0;
  double segment_len = 1.0;  // seconds; clip duration = segs_per_clip * segment_len
  geom::FieldSpec field;

  void validate() const;
};

/// Bounded Gaussian random walks (reflected at the field edges). Each video
/// continues its players' walks across consecutive clips; every clip holds
/// `players_per_clip` players plus one ball. Deterministic in `rng_seed`.
std::vector<geom::Video> generate_dataset(const GenConfig& cfg);

/// Seeded shuffle of video ids; the first ceil(train_fraction * n) go to train.
io::SplitManifest make_split(const std::vector<geom::Video>& videos, double train_fraction,
                             std::uint64_t seed);

class NoiseRate {
 public:
  explicit NoiseRate(double delta);
  double value() const { return delta_; }

 private:
  double delta_;
};

/// ceil(delta * k), robust to representation error in delta * k.
std::size_t replacement_count(NoiseRate delta, std::size_t k);

/// Donor trajectories and clips drawn from the training split.
class SamplePool {
 public:
  SamplePool() = default;
  explicit SamplePool(const std::vector<geom::Video>& training_videos);

  bool empty() const { return trajectories_.empty() || clips_.empty(); }
  const std::vector<geom::Trajectory>& trajectories() const { return trajectories_; }
  const std::vector<geom::Clip>& clips() const { return clips_; }

 private:
  std::vector<geom::Trajectory> trajectories_;
  std::vector<geom::Clip> clips_;
};

/// Positions touched by a variant operation, for auditing replacement counts.
struct VariantReport {
  std::vector<std::vector<std::size_t>> replaced_tracks;  // per clip
  std::vector<std::size_t> replaced_clips;
};

/// Replaces ceil(delta*K) trajectories of every clip with pool draws,
/// time-rebased into the clip window. Visual features are left untouched.
geom::Video make_intra_variant(const geom::Video& video, NoiseRate delta, const SamplePool& pool,
                               Rng& rng, VariantReport* report = nullptr);

/// Replaces ceil(delta*n) clips with pool clips (trajectories and visual
/// features). Replacement clips keep the slot's duration.
geom::Video make_inter_variant(const geom::Video& video, NoiseRate delta, const SamplePool& pool,
                               Rng& rng, VariantReport* report = nullptr);

/// Evaluation query: intra-clip noise followed by inter-clip noise at the same rate.
geom::Video make_eval_query(const geom::Video& video, NoiseRate delta, const SamplePool& pool,
                            Rng& rng);

}  // namespace trajsv::synth
