#pragma once

// JSON Lines dataset format (one video per line) and the train/test split manifest.

#include <filesystem>
#include <string>
#include <vector>

#include "trajsv/geom.hpp"

namespace trajsv::io {

struct SplitManifest {
  std::vector<std::string> train;
  std::vector<std::string> test;
};

std::string video_to_json_line(const geom::Video& video);

/// Parses one dataset line. Trajectories are normalized against `field`.
geom::Video video_from_json_line(const std::string& line, const geom::FieldSpec& field);

void write_dataset(const std::filesystem::path& path, const std::vector<geom::Video>& videos);
std::vector<geom::Video> read_dataset(const std::filesystem::path& path, const geom::FieldSpec& field);

void write_split(const std::filesystem::path& path, const SplitManifest& split);
SplitManifest read_split(const std::filesystem::path& path);

/// Partitions videos by id according to the manifest, in manifest order.
/// Throws DataError when a manifest id is missing from the dataset.
void apply_split(const std::vector<geom::Video>& videos, const SplitManifest& split,
                 std::vector<geom::Video>& train, std::vector<geom::Video>& test);

/// Writes `text` to `path`, replacing any existing file.
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace trajsv::io
