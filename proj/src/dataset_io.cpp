#include "trajsv/dataset_io.hpp"

#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "trajsv/error.hpp"

namespace trajsv::io {

using nlohmann::json;

std::string video_to_json_line(const geom::Video& video) {
  json clips = json::array();
  for (const auto& clip : video.clips) {
    json tracks = json::array();
    for (const auto& traj : clip.trajectories) {
      json points = json::array();
      for (const auto& p : traj.points) points.push_back({p.t, p.x, p.y});
      tracks.push_back({{"object_id", traj.object_id},
                        {"kind", geom::to_string(traj.kind)},
                        {"points", std::move(points)}});
    }
    clips.push_back(
        {{"clip_id", clip.clip_id}, {"duration", clip.duration}, {"tracks", std::move(tracks)}});
  }
  json j = {{"video_id", video.video_id}, {"clips", std::move(clips)}};
  return j.dump();
}

geom::Video video_from_json_line(const std::string& line, const geom::FieldSpec& field) {
  geom::Video video;
  try {
    const json j = json::parse(line);
    video.video_id = j.at("video_id").get<std::string>();
    for (const auto& jc : j.at("clips")) {
      geom::Clip clip;
      clip.clip_id = jc.at("clip_id").get<std::string>();
      clip.duration = jc.at("duration").get<double>();
      for (const auto& jt : jc.at("tracks")) {
        geom::Trajectory traj;
        traj.object_id = jt.at("object_id").get<std::string>();
        traj.kind = geom::object_kind_from_string(jt.at("kind").get<std::string>());
        for (const auto& jp : jt.at("points")) {
          if (!jp.is_array() || jp.size() != 3) throw DataError("point must be [t, x, y]");
          traj.points.push_back({jp[0].get<double>(), jp[1].get<double>(), jp[2].get<double>()});
        }
        geom::normalize_trajectory(traj, field);
        clip.trajectories.push_back(std::move(traj));
      }
      video.clips.push_back(std::move(clip));
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed dataset line: ") + e.what());
  }
  geom::validate_video(video);
  return video;
}

void write_dataset(const std::filesystem::path& path, const std::vector<geom::Video>& videos) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open dataset for writing: " + path.string());
  for (const auto& v : videos) out << video_to_json_line(v) << '\n';
  if (!out) throw DataError("failed writing dataset: " + path.string());
}

std::vector<geom::Video> read_dataset(const std::filesystem::path& path,
                                      const geom::FieldSpec& field) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset: " + path.string());
  std::vector<geom::Video> videos;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      videos.push_back(video_from_json_line(line, field));
    } catch (const DataError& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (!seen.insert(videos.back().video_id).second) {
      throw DataError("duplicate video_id '" + videos.back().video_id + "'");
    }
  }
  return videos;
}

void write_split(const std::filesystem::path& path, const SplitManifest& split) {
  json j = {{"train", split.train}, {"test", split.test}};
  write_text(path, j.dump(2) + "\n");
}

SplitManifest read_split(const std::filesystem::path& path) {
  try {
    const json j = json::parse(read_text(path));
    return {j.at("train").get<std::vector<std::string>>(), j.at("test").get<std::vector<std::string>>()};
  } catch (const json::exception& e) {
    throw DataError("malformed split manifest " + path.string() + ": " + e.what());
  }
}

void apply_split(const std::vector<geom::Video>& videos, const SplitManifest& split,
                 std::vector<geom::Video>& train, std::vector<geom::Video>& test) {
  std::unordered_map<std::string, const geom::Video*> by_id;
  for (const auto& v : videos) by_id.emplace(v.video_id, &v);
  auto collect = [&](const std::vector<std::string>& ids, std::vector<geom::Video>& out) {
    out.clear();
    for (const auto& id : ids) {
      auto it = by_id.find(id);
      if (it == by_id.end()) throw DataError("split references unknown video '" + id + "'");
      out.push_back(*it->second);
    }
  };
  collect(split.train, train);
  collect(split.test, test);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  out << text;
  if (!out) throw DataError("failed writing: " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace trajsv::io
