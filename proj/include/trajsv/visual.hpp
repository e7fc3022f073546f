#pragma once

// Frozen per-clip visual features. The pipeline never back-propagates into
// these vectors; they are attached to clips once and travel with them.

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "trajsv/geom.hpp"

namespace trajsv::visual {

class VisualFeatureProvider {
 public:
  virtual ~VisualFeatureProvider() = default;
  virtual std::size_t dim() const = 0;
  virtual std::vector<double> features(const geom::Clip& clip) const = 0;
};

inline constexpr std::size_t kClipStatCount = 64;

/// Hand-crafted clip statistics: coarse player/ball occupancy histograms,
/// speed moments, net displacement, centroid and spread.
std::vector<double> clip_statistics(const geom::Clip& clip, const geom::FieldSpec& field);

/// Deterministic stand-in for a pretrained backbone: a seeded random
/// projection of clip_statistics() to `dim` outputs.
class StubVisualProvider final : public VisualFeatureProvider {
 public:
  StubVisualProvider(std::size_t dim, std::uint64_t seed, geom::FieldSpec field);
  std::size_t dim() const override { return dim_; }
  std::vector<double> features(const geom::Clip& clip) const override;

 private:
  std::size_t dim_;
  geom::FieldSpec field_;
  std::vector<double> projection_;  // kClipStatCount x dim, row-major
};

/// Reads JSONL lines {"clip_id": str, "vec": [f64 x dim]}.
class FileVisualProvider final : public VisualFeatureProvider {
 public:
  FileVisualProvider(const std::filesystem::path& path, std::size_t dim);
  std::size_t dim() const override { return dim_; }
  std::vector<double> features(const geom::Clip& clip) const override;

 private:
  std::size_t dim_;
  std::unordered_map<std::string, std::vector<double>> table_;
};

void write_visual_features(const std::filesystem::path& path, const std::vector<geom::Video>& videos);

/// Fills clip.visual for every clip that does not have one yet.
void attach_visual(std::vector<geom::Video>& videos, const VisualFeatureProvider& provider);

}  // namespace trajsv::visual
