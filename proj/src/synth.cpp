#include "trajsv/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "trajsv/error.hpp"

namespace trajsv::synth {

void GenConfig::validate() const {
  if (n_videos < 1 || clips_per_video < 1 || segs_per_clip < 1 || players_per_clip < 1) {
    throw ConfigError("generator counts must all be at least 1");
  }
  if (!(step_std > 0.0)) throw ConfigError("step_std must be positive");
  if (!(ball_speed_mult > 0.0)) throw ConfigError("ball_speed_mult must be positive");
  if (!(sample_hz > 0.0)) throw ConfigError("sample_hz must be positive");
  if (!(segment_len > 0.0)) throw ConfigError("segment_len must be positive");
  field.validate();
}

namespace {

std::string numbered(const char* prefix, int width, int value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%0*d", prefix, width, value);
  return buf;
}

double reflect(double v, double lo, double hi) {
  // Mirror at the bounds until inside; a single huge step may bounce more than once.
  for (int i = 0; i < 8 && (v < lo || v > hi); ++i) {
    if (v < lo) v = 2.0 * lo - v;
    if (v > hi) v = 2.0 * hi - v;
  }
  return std::clamp(v, lo, hi);
}

struct Walker {
  double x;
  double y;
  double step_std;
};

geom::Video generate_video(const GenConfig& cfg, int index) {
  Rng rng(derive_seed(cfg.rng_seed, static_cast<std::uint64_t>(index)));
  const auto& f = cfg.field;
  std::uniform_real_distribution<double> ux(f.x_min, f.x_max);
  std::uniform_real_distribution<double> uy(f.y_min, f.y_max);
  std::normal_distribution<double> step(0.0, 1.0);

  std::vector<Walker> walkers;
  for (int p = 0; p < cfg.players_per_clip; ++p) walkers.push_back({ux(rng), uy(rng), cfg.step_std});
  walkers.push_back({ux(rng), uy(rng), cfg.step_std * cfg.ball_speed_mult});

  const double duration = cfg.segs_per_clip * cfg.segment_len;
  const auto samples = static_cast<int>(std::floor(duration * cfg.sample_hz + 1e-9));

  geom::Video video;
  video.video_id = numbered("v", 4, index);
  for (int c = 0; c < cfg.clips_per_video; ++c) {
    geom::Clip clip;
    clip.clip_id = video.video_id + numbered("_c", 2, c);
    clip.duration = duration;
    for (std::size_t w = 0; w < walkers.size(); ++w) {
      const bool is_ball = w + 1 == walkers.size();
      geom::Trajectory traj;
      traj.object_id = is_ball ? "ball" : numbered("p", 0, static_cast<int>(w));
      traj.kind = is_ball ? geom::ObjectKind::ball : geom::ObjectKind::player;
      auto& wk = walkers[w];
      for (int s = 0; s <= samples; ++s) {
        if (s > 0) {
          wk.x = reflect(wk.x + wk.step_std * step(rng), f.x_min, f.x_max);
          wk.y = reflect(wk.y + wk.step_std * step(rng), f.y_min, f.y_max);
        }
        traj.points.push_back({s / cfg.sample_hz, wk.x, wk.y});
      }
      clip.trajectories.push_back(std::move(traj));
    }
    video.clips.push_back(std::move(clip));
  }
  return video;
}

// k distinct positions out of n, uniformly, returned sorted.
std::vector<std::size_t> choose_positions(std::size_t n, std::size_t k, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + uniform_index(rng, n - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

// Shift so the first sample sits at t = 0 and drop samples past `duration`.
geom::Trajectory rebase(const geom::Trajectory& donor, double duration) {
  geom::Trajectory out;
  out.object_id = donor.object_id;
  out.kind = donor.kind;
  const double t0 = donor.points.front().t;
  for (const auto& p : donor.points) {
    const double t = p.t - t0;
    if (t > duration) break;
    out.points.push_back({t, p.x, p.y});
  }
  return out;
}

}  // namespace

std::vector<geom::Video> generate_dataset(const GenConfig& cfg) {
  cfg.validate();
  std::vector<geom::Video> videos;
  videos.reserve(static_cast<std::size_t>(cfg.n_videos));
  for (int i = 0; i < cfg.n_videos; ++i) videos.push_back(generate_video(cfg, i));
  return videos;
}

io::SplitManifest make_split(const std::vector<geom::Video>& videos, double train_fraction,
                             std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("train fraction must lie in (0, 1)");
  }
  std::vector<std::string> ids;
  for (const auto& v : videos) ids.push_back(v.video_id);
  Rng rng(derive_seed(seed, 0x5711));
  std::shuffle(ids.begin(), ids.end(), rng);
  const auto n_train = static_cast<std::size_t>(std::ceil(train_fraction * ids.size() - 1e-9));
  io::SplitManifest split;
  split.train.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.test.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train), ids.end());
  return split;
}

NoiseRate::NoiseRate(double delta) : delta_(delta) {
  if (!(delta >= 0.0 && delta <= 1.0)) throw InvalidArgument("noise rate must lie in [0, 1]");
}

std::size_t replacement_count(NoiseRate delta, std::size_t k) {
  const double raw = delta.value() * static_cast<double>(k);
  return std::min(k, static_cast<std::size_t>(std::ceil(raw - 1e-9)));
}

SamplePool::SamplePool(const std::vector<geom::Video>& training_videos) {
  for (const auto& v : training_videos) {
    for (const auto& c : v.clips) {
      clips_.push_back(c);
      for (const auto& t : c.trajectories) trajectories_.push_back(t);
    }
  }
}

geom::Video make_intra_variant(const geom::Video& video, NoiseRate delta, const SamplePool& pool,
                               Rng& rng, VariantReport* report) {
  if (pool.empty()) throw InvalidArgument("sample pool is empty");
  geom::Video out = video;
  if (report) report->replaced_tracks.assign(out.clips.size(), {});
  for (std::size_t c = 0; c < out.clips.size(); ++c) {
    auto& clip = out.clips[c];
    const auto k = replacement_count(delta, clip.trajectories.size());
    const auto positions = choose_positions(clip.trajectories.size(), k, rng);
    for (const auto pos : positions) {
      const auto& donor = pool.trajectories()[uniform_index(rng, pool.trajectories().size())];
      clip.trajectories[pos] = rebase(donor, clip.duration);
    }
    if (report) report->replaced_tracks[c] = positions;
  }
  return out;
}

geom::Video make_inter_variant(const geom::Video& video, NoiseRate delta, const SamplePool& pool,
                               Rng& rng, VariantReport* report) {
  if (pool.empty()) throw InvalidArgument("sample pool is empty");
  geom::Video out = video;
  const auto k = replacement_count(delta, out.clips.size());
  const auto positions = choose_positions(out.clips.size(), k, rng);
  for (const auto pos : positions) {
    const auto& donor = pool.clips()[uniform_index(rng, pool.clips().size())];
    geom::Clip replacement;
    replacement.clip_id = donor.clip_id;
    replacement.duration = out.clips[pos].duration;
    replacement.visual = donor.visual;
    // Donor times are already clip-relative; only trim to the slot duration.
    for (const auto& t : donor.trajectories) {
      geom::Trajectory trimmed{t.object_id, t.kind, {}};
      for (const auto& p : t.points) {
        if (p.t > replacement.duration) break;
        trimmed.points.push_back(p);
      }
      if (!trimmed.points.empty()) replacement.trajectories.push_back(std::move(trimmed));
    }
    out.clips[pos] = std::move(replacement);
  }
  if (report) report->replaced_clips = positions;
  return out;
}

geom::Video make_eval_query(const geom::Video& video, NoiseRate delta, const SamplePool& pool,
                            Rng& rng) {
  return make_inter_variant(make_intra_variant(video, delta, pool, rng), delta, pool, rng);
}

}  // namespace trajsv::synth
