#include "trajsv/visual.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "trajsv/error.hpp"
#include "trajsv/rng.hpp"

namespace trajsv::visual {

namespace {

constexpr int kZoneCols = 6;
constexpr int kZoneRows = 4;
constexpr double kSpeedScale = 10.0;  // m/s

int zone_of(double x, double y, const geom::FieldSpec& f) {
  const double u = (x - f.x_min) / (f.x_max - f.x_min);
  const double v = (y - f.y_min) / (f.y_max - f.y_min);
  const int c = std::min(kZoneCols - 1, std::max(0, static_cast<int>(u * kZoneCols)));
  const int r = std::min(kZoneRows - 1, std::max(0, static_cast<int>(v * kZoneRows)));
  return r * kZoneCols + c;
}

struct Moments {
  double n = 0, sum = 0, sum_sq = 0;
  void add(double v) {
    n += 1;
    sum += v;
    sum_sq += v * v;
  }
  double mean() const { return n > 0 ? sum / n : 0.0; }
  double stddev() const {
    if (n < 2) return 0.0;
    const double m = mean();
    return std::sqrt(std::max(0.0, sum_sq / n - m * m));
  }
};

}  // namespace

std::vector<double> clip_statistics(const geom::Clip& clip, const geom::FieldSpec& field) {
  constexpr int zones = kZoneCols * kZoneRows;
  std::vector<double> stats(kClipStatCount, 0.0);
  double* player_hist = stats.data();
  double* ball_hist = stats.data() + zones;
  double* tail = stats.data() + 2 * zones;

  const double half_w = 0.5 * (field.x_max - field.x_min);
  const double half_h = 0.5 * (field.y_max - field.y_min);
  const double cx = 0.5 * (field.x_max + field.x_min);
  const double cy = 0.5 * (field.y_max + field.y_min);

  Moments player_speed, ball_speed, px, py, bx, by;
  double player_dx = 0, player_dy = 0, ball_dx = 0, ball_dy = 0;
  double player_points = 0, ball_points = 0, players = 0, total_points = 0;
  for (const auto& traj : clip.trajectories) {
    const bool ball = traj.kind == geom::ObjectKind::ball;
    (ball ? ball_points : player_points) += static_cast<double>(traj.points.size());
    if (!ball) players += 1;
    total_points += static_cast<double>(traj.points.size());
    for (std::size_t i = 0; i < traj.points.size(); ++i) {
      const auto& p = traj.points[i];
      (ball ? ball_hist : player_hist)[zone_of(p.x, p.y, field)] += 1.0;
      (ball ? bx : px).add((p.x - cx) / half_w);
      (ball ? by : py).add((p.y - cy) / half_h);
      if (i > 0) {
        const auto& q = traj.points[i - 1];
        const double dt = p.t - q.t;
        const double speed = std::hypot(p.x - q.x, p.y - q.y) / dt / kSpeedScale;
        (ball ? ball_speed : player_speed).add(speed);
      }
    }
    const double dx = (traj.points.back().x - traj.points.front().x) / half_w;
    const double dy = (traj.points.back().y - traj.points.front().y) / half_h;
    if (ball) {
      ball_dx += dx;
      ball_dy += dy;
    } else {
      player_dx += dx;
      player_dy += dy;
    }
  }
  for (int z = 0; z < zones; ++z) {
    if (player_points > 0) player_hist[z] /= player_points;
    if (ball_points > 0) ball_hist[z] /= ball_points;
  }
  const double inv_players = players > 0 ? 1.0 / players : 0.0;
  const double values[] = {
      player_speed.mean(), player_speed.stddev(), ball_speed.mean(), ball_speed.stddev(),
      player_dx * inv_players, player_dy * inv_players, ball_dx, ball_dy,
      px.mean(), py.mean(), px.stddev(), py.stddev(),
      bx.mean(), by.mean(),
      players / 10.0, total_points / 1000.0,
  };
  static_assert(2 * zones + sizeof values / sizeof values[0] == kClipStatCount);
  std::copy(std::begin(values), std::end(values), tail);
  return stats;
}

StubVisualProvider::StubVisualProvider(std::size_t dim, std::uint64_t seed, geom::FieldSpec field)
    : dim_(dim), field_(field), projection_(kClipStatCount * dim) {
  if (dim == 0) throw InvalidArgument("visual dimension must be positive");
  Rng rng(derive_seed(seed, 0x715a));
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(kClipStatCount)));
  for (auto& w : projection_) w = normal(rng);
}

std::vector<double> StubVisualProvider::features(const geom::Clip& clip) const {
  const auto stats = clip_statistics(clip, field_);
  std::vector<double> out(dim_, 0.0);
  for (std::size_t s = 0; s < kClipStatCount; ++s) {
    const double v = stats[s];
    if (v == 0.0) continue;
    const double* row = projection_.data() + s * dim_;
    for (std::size_t j = 0; j < dim_; ++j) out[j] += v * row[j];
  }
  return out;
}

FileVisualProvider::FileVisualProvider(const std::filesystem::path& path, std::size_t dim) : dim_(dim) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open visual feature file: " + path.string());
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      auto vec = j.at("vec").get<std::vector<double>>();
      if (vec.size() != dim_) {
        throw DataError("visual vector for '" + j.at("clip_id").get<std::string>() + "' has dimension " +
                        std::to_string(vec.size()) + ", expected " + std::to_string(dim_));
      }
      table_[j.at("clip_id").get<std::string>()] = std::move(vec);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(std::string("malformed visual feature line: ") + e.what());
    }
  }
}

std::vector<double> FileVisualProvider::features(const geom::Clip& clip) const {
  auto it = table_.find(clip.clip_id);
  if (it == table_.end()) throw DataError("no visual features for clip '" + clip.clip_id + "'");
  return it->second;
}

void write_visual_features(const std::filesystem::path& path, const std::vector<geom::Video>& videos) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  for (const auto& v : videos) {
    for (const auto& c : v.clips) {
      out << nlohmann::json{{"clip_id", c.clip_id}, {"vec", c.visual}}.dump() << '\n';
    }
  }
}

void attach_visual(std::vector<geom::Video>& videos, const VisualFeatureProvider& provider) {
  for (auto& v : videos) {
    for (auto& c : v.clips) {
      if (c.visual.empty()) c.visual = provider.features(c);
    }
  }
}

}  // namespace trajsv::visual
