#pragma once

// Field geometry, the trajectory/clip/video data model and segment-matrix
// rasterization.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace trajsv::geom {

/// Rectangular playing field partitioned into square cells.
struct FieldSpec {
  double x_min = -52.5;
  double x_max = 52.5;
  double y_min = -34.0;
  double y_max = 34.0;
  double cell_size = 3.0;

  /// Throws InvalidArgument when the bounds or cell size are degenerate.
  void validate() const;

  int grid_w() const;
  int grid_h() const;

  /// Clamps (x, y) into the field bounds.
  std::pair<double, double> clamp(double x, double y) const;

  /// Cell (col, row) containing (x, y); points on the far edges fall into the last cell.
  std::pair<int, int> cell_of(double x, double y) const;

  bool operator==(const FieldSpec&) const = default;
};

enum class ObjectKind { player, ball };

const char* to_string(ObjectKind kind);
ObjectKind object_kind_from_string(const std::string& s);

struct TrackPoint {
  double t = 0.0;
  double x = 0.0;
  double y = 0.0;

  bool operator==(const TrackPoint&) const = default;
};

struct Trajectory {
  std::string object_id;
  ObjectKind kind = ObjectKind::player;
  std::vector<TrackPoint> points;

  bool operator==(const Trajectory&) const = default;
};

struct Clip {
  std::string clip_id;
  double duration = 0.0;
  std::vector<Trajectory> trajectories;
  // Frozen visual feature attached by a VisualFeatureProvider; empty until attached.
  std::vector<double> visual;

  bool operator==(const Clip&) const = default;
};

struct Video {
  std::string video_id;
  std::vector<Clip> clips;

  bool operator==(const Video&) const = default;
};

/// Enforces the data-model invariants on a freshly ingested trajectory:
/// nonempty, strictly increasing timestamps, coordinates clamped to the field.
void normalize_trajectory(Trajectory& traj, const FieldSpec& field);

/// Throws DataError if a clip violates its invariants.
void validate_clip(const Clip& clip);
void validate_video(const Video& video);

/// Binary grid occupancy for one time segment. Bit (row, col) is set when a
/// trajectory traveled through that cell.
class SegmentMatrix {
 public:
  SegmentMatrix() = default;
  SegmentMatrix(int grid_h, int grid_w);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t popcount() const { return popcount_; }
  bool empty() const { return popcount_ == 0; }

  bool test(int row, int col) const;
  void set(int row, int col);

  /// |a AND b|; both must have equal dimensions.
  std::size_t intersection_count(const SegmentMatrix& other) const;

  std::span<const std::uint64_t> words() const { return words_; }

  /// Row-major run-length encoding: alternating run lengths starting with a run of zeros.
  std::vector<std::uint32_t> run_lengths() const;
  static SegmentMatrix from_run_lengths(int grid_h, int grid_w,
                                        std::span<const std::uint32_t> runs);

  bool operator==(const SegmentMatrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_ && words_ == other.words_;
  }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::size_t popcount_ = 0;
  std::vector<std::uint64_t> words_;
};

/// |a AND b| / |a OR b|, defined as 1 when both are all-zero.
/// Throws InvalidArgument on a dimension mismatch.
double jaccard(const SegmentMatrix& a, const SegmentMatrix& b);

enum class RasterMode {
  supercover,  // sample cells plus every cell crossed between consecutive samples
  points,      // sample cells only
};

/// Marks the cells traveled through by one ordered run of samples.
void rasterize_into(SegmentMatrix& out, std::span<const TrackPoint> points, const FieldSpec& field,
                    RasterMode mode = RasterMode::supercover);

SegmentMatrix rasterize(std::span<const TrackPoint> points, const FieldSpec& field,
                        RasterMode mode = RasterMode::supercover);

/// Splits a clip into `m` consecutive windows of `segment_len` seconds and
/// rasterizes every trajectory into each window. Windows past the clip
/// duration are all-zero; only the first `m` windows are kept.
std::vector<SegmentMatrix> segment_clip(const Clip& clip, const FieldSpec& field, double segment_len,
                                        int m, RasterMode mode = RasterMode::supercover);

}  // namespace trajsv::geom
