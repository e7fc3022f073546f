#include "trajsv/geom.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

#include "trajsv/error.hpp"

namespace trajsv::geom {

void FieldSpec::validate() const {
  if (!(x_min < x_max) || !(y_min < y_max)) {
    throw InvalidArgument("field bounds must satisfy min < max");
  }
  if (!(cell_size > 0.0) || !std::isfinite(cell_size)) {
    throw InvalidArgument("cell_size must be positive");
  }
}

int FieldSpec::grid_w() const { return static_cast<int>(std::ceil((x_max - x_min) / cell_size)); }

int FieldSpec::grid_h() const { return static_cast<int>(std::ceil((y_max - y_min) / cell_size)); }

std::pair<double, double> FieldSpec::clamp(double x, double y) const {
  return {std::clamp(x, x_min, x_max), std::clamp(y, y_min, y_max)};
}

std::pair<int, int> FieldSpec::cell_of(double x, double y) const {
  auto [cx, cy] = clamp(x, y);
  int col = static_cast<int>(std::floor((cx - x_min) / cell_size));
  int row = static_cast<int>(std::floor((cy - y_min) / cell_size));
  return {std::clamp(col, 0, grid_w() - 1), std::clamp(row, 0, grid_h() - 1)};
}

const char* to_string(ObjectKind kind) { return kind == ObjectKind::ball ? "ball" : "player"; }

ObjectKind object_kind_from_string(const std::string& s) {
  if (s == "player") return ObjectKind::player;
  if (s == "ball") return ObjectKind::ball;
  throw DataError("unknown object kind '" + s + "'");
}

void normalize_trajectory(Trajectory& traj, const FieldSpec& field) {
  if (traj.points.empty()) {
    throw DataError("trajectory '" + traj.object_id + "' has no points");
  }
  for (std::size_t i = 0; i < traj.points.size(); ++i) {
    auto& p = traj.points[i];
    if (!std::isfinite(p.t) || !std::isfinite(p.x) || !std::isfinite(p.y)) {
      throw DataError("trajectory '" + traj.object_id + "' has a non-finite sample");
    }
    if (i > 0 && !(p.t > traj.points[i - 1].t)) {
      throw DataError("trajectory '" + traj.object_id + "' timestamps are not strictly increasing");
    }
    std::tie(p.x, p.y) = field.clamp(p.x, p.y);
  }
}

void validate_clip(const Clip& clip) {
  if (!(clip.duration > 0.0)) {
    throw DataError("clip '" + clip.clip_id + "' has non-positive duration");
  }
  for (const auto& traj : clip.trajectories) {
    if (traj.points.empty()) {
      throw DataError("clip '" + clip.clip_id + "' contains an empty trajectory");
    }
    for (const auto& p : traj.points) {
      if (p.t < 0.0 || p.t > clip.duration) {
        throw DataError("clip '" + clip.clip_id + "' has a sample outside [0, duration]");
      }
    }
  }
}

void validate_video(const Video& video) {
  if (video.clips.empty()) {
    throw DataError("video '" + video.video_id + "' has no clips");
  }
  for (const auto& clip : video.clips) validate_clip(clip);
}

// --- SegmentMatrix ---------------------------------------------------------

SegmentMatrix::SegmentMatrix(int grid_h, int grid_w) : rows_(grid_h), cols_(grid_w) {
  if (grid_h <= 0 || grid_w <= 0) throw InvalidArgument("segment matrix dimensions must be positive");
  const std::size_t bits = static_cast<std::size_t>(grid_h) * static_cast<std::size_t>(grid_w);
  words_.assign((bits + 63) / 64, 0);
}

bool SegmentMatrix::test(int row, int col) const {
  const std::size_t idx = static_cast<std::size_t>(row) * cols_ + col;
  return (words_[idx / 64] >> (idx % 64)) & 1U;
}

void SegmentMatrix::set(int row, int col) {
  const std::size_t idx = static_cast<std::size_t>(row) * cols_ + col;
  const std::uint64_t mask = std::uint64_t{1} << (idx % 64);
  if ((words_[idx / 64] & mask) == 0) {
    words_[idx / 64] |= mask;
    ++popcount_;
  }
}

std::size_t SegmentMatrix::intersection_count(const SegmentMatrix& other) const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < words_.size(); ++i) {
    n += static_cast<std::size_t>(std::popcount(words_[i] & other.words_[i]));
  }
  return n;
}

std::vector<std::uint32_t> SegmentMatrix::run_lengths() const {
  std::vector<std::uint32_t> runs;
  const std::size_t bits = static_cast<std::size_t>(rows_) * cols_;
  bool current = false;
  std::uint32_t run = 0;
  for (std::size_t idx = 0; idx < bits; ++idx) {
    const bool bit = (words_[idx / 64] >> (idx % 64)) & 1U;
    if (bit != current) {
      runs.push_back(run);
      run = 0;
      current = bit;
    }
    ++run;
  }
  runs.push_back(run);
  return runs;
}

SegmentMatrix SegmentMatrix::from_run_lengths(int grid_h, int grid_w,
                                              std::span<const std::uint32_t> runs) {
  SegmentMatrix m(grid_h, grid_w);
  const std::size_t bits = static_cast<std::size_t>(grid_h) * grid_w;
  std::size_t idx = 0;
  bool current = false;
  for (const auto run : runs) {
    if (idx + run > bits) throw DataError("run-length encoding overflows the grid");
    if (current) {
      for (std::size_t k = 0; k < run; ++k) {
        m.set(static_cast<int>((idx + k) / grid_w), static_cast<int>((idx + k) % grid_w));
      }
    }
    idx += run;
    current = !current;
  }
  if (idx != bits) throw DataError("run-length encoding does not cover the grid");
  return m;
}

double jaccard(const SegmentMatrix& a, const SegmentMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw InvalidArgument("jaccard: segment matrix dimensions differ");
  }
  const std::size_t inter = a.intersection_count(b);
  const std::size_t uni = a.popcount() + b.popcount() - inter;
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

// --- rasterization ---------------------------------------------------------

namespace {

struct GridPoint {
  double u;  // column coordinate in cell units
  double v;  // row coordinate in cell units
};

GridPoint to_grid(const TrackPoint& p, const FieldSpec& field) {
  auto [x, y] = field.clamp(p.x, p.y);
  return {(x - field.x_min) / field.cell_size, (y - field.y_min) / field.cell_size};
}

int cell_index(double coord, int limit) {
  return std::clamp(static_cast<int>(std::floor(coord)), 0, limit - 1);
}

void mark(SegmentMatrix& out, int col, int row) {
  if (col >= 0 && col < out.cols() && row >= 0 && row < out.rows()) out.set(row, col);
}

// Grid traversal from a to b marking every cell the segment passes through.
// When the segment crosses a cell corner exactly, both side cells are marked.
void supercover(SegmentMatrix& out, GridPoint a, GridPoint b) {
  const int w = out.cols();
  const int h = out.rows();
  int col = cell_index(a.u, w);
  int row = cell_index(a.v, h);
  const int end_col = cell_index(b.u, w);
  const int end_row = cell_index(b.v, h);
  mark(out, col, row);

  const double du = b.u - a.u;
  const double dv = b.v - a.v;
  const int step_c = du > 0 ? 1 : (du < 0 ? -1 : 0);
  const int step_r = dv > 0 ? 1 : (dv < 0 ? -1 : 0);
  constexpr double inf = std::numeric_limits<double>::infinity();

  auto first_crossing = [](double start, double delta, int cell, int step) {
    if (step == 0) return inf;
    const double boundary = step > 0 ? cell + 1.0 : static_cast<double>(cell);
    return (boundary - start) / delta;
  };
  double t_max_c = first_crossing(a.u, du, col, step_c);
  double t_max_r = first_crossing(a.v, dv, row, step_r);
  const double t_delta_c = step_c != 0 ? std::abs(1.0 / du) : inf;
  const double t_delta_r = step_r != 0 ? std::abs(1.0 / dv) : inf;

  const int max_steps = std::abs(end_col - col) + std::abs(end_row - row);
  for (int s = 0; s < max_steps && (col != end_col || row != end_row); ++s) {
    if (t_max_c < t_max_r) {
      col += step_c;
      t_max_c += t_delta_c;
    } else if (t_max_r < t_max_c) {
      row += step_r;
      t_max_r += t_delta_r;
    } else {
      mark(out, col + step_c, row);
      mark(out, col, row + step_r);
      col += step_c;
      row += step_r;
      t_max_c += t_delta_c;
      t_max_r += t_delta_r;
      ++s;
    }
    col = std::clamp(col, 0, w - 1);
    row = std::clamp(row, 0, h - 1);
    mark(out, col, row);
  }
}

}  // namespace

void rasterize_into(SegmentMatrix& out, std::span<const TrackPoint> points, const FieldSpec& field,
                    RasterMode mode) {
  if (points.empty()) return;
  GridPoint prev = to_grid(points.front(), field);
  mark(out, cell_index(prev.u, out.cols()), cell_index(prev.v, out.rows()));
  for (std::size_t i = 1; i < points.size(); ++i) {
    const GridPoint cur = to_grid(points[i], field);
    if (mode == RasterMode::supercover) {
      supercover(out, prev, cur);
    } else {
      mark(out, cell_index(cur.u, out.cols()), cell_index(cur.v, out.rows()));
    }
    prev = cur;
  }
}

SegmentMatrix rasterize(std::span<const TrackPoint> points, const FieldSpec& field,
                        RasterMode mode) {
  field.validate();
  SegmentMatrix out(field.grid_h(), field.grid_w());
  rasterize_into(out, points, field, mode);
  return out;
}

std::vector<SegmentMatrix> segment_clip(const Clip& clip, const FieldSpec& field, double segment_len,
                                        int m, RasterMode mode) {
  if (!(segment_len > 0.0)) throw InvalidArgument("segment_len must be positive");
  if (m < 1) throw InvalidArgument("segment count m must be at least 1");
  field.validate();

  std::vector<SegmentMatrix> out(static_cast<std::size_t>(m),
                                 SegmentMatrix(field.grid_h(), field.grid_w()));
  if (!(clip.duration > 0.0)) return out;

  // Windows starting at or past the duration are padding. A sample at exactly
  // t == duration belongs to the last real window.
  const auto real_windows = static_cast<long>(std::ceil(clip.duration / segment_len - 1e-9));
  const long last_window = std::max(0L, real_windows - 1);

  std::vector<TrackPoint> run;
  for (const auto& traj : clip.trajectories) {
    long current = -1;
    run.clear();
    auto flush = [&] {
      if (current >= 0 && current < m && !run.empty()) {
        rasterize_into(out[static_cast<std::size_t>(current)], run, field, mode);
      }
      run.clear();
    };
    for (const auto& p : traj.points) {
      const long window = std::min(static_cast<long>(std::floor(p.t / segment_len)), last_window);
      if (window != current) {
        flush();
        current = window;
      }
      run.push_back(p);
    }
    flush();
  }
  return out;
}

}  // namespace trajsv::geom
