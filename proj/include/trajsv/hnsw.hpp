#pragma once

// Hierarchical navigable small-world graph over an EmbeddingDb.
//
// Nodes get a geometric random level; each level keeps at most M neighbors
// per node (2M on the base level) chosen with the diversity heuristic.
// Queries descend greedily through the upper levels, then run a beam search
// of width ef on the base level. After build the index is read-only.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "trajsv/retrieval.hpp"

namespace trajsv::retrieval {

struct AnnParams {
  std::size_t M = 16;
  std::size_t ef_construction = 200;
  std::size_t ef_search = 64;
  std::uint64_t seed = 42;

  void validate() const;
};

class AnnIndex {
 public:
  AnnIndex() = default;

  static AnnIndex build(const EmbeddingDb& db, const AnnParams& params);

  bool built() const { return built_; }
  std::size_t size() const { return db_.size(); }
  const AnnParams& params() const { return params_; }
  const EmbeddingDb& db() const { return db_; }

  /// Top-k by descending similarity. Throws StateError before build and
  /// InvalidArgument when ef_search < k.
  std::vector<Hit> query(std::span<const double> vec, std::size_t k, std::size_t ef_search) const;
  std::vector<Hit> query(std::span<const double> vec, std::size_t k) const {
    return query(vec, k, std::max(k, params_.ef_search));
  }

  int max_level() const { return max_level_; }
  std::size_t entry_point() const { return entry_; }
  int level_of(std::size_t node) const { return levels_.at(node); }
  const std::vector<std::uint32_t>& neighbors(std::size_t node, int level) const {
    return links_.at(node).at(static_cast<std::size_t>(level));
  }

  void save(const std::filesystem::path& path) const;
  static AnnIndex load(const std::filesystem::path& path);

 private:
  struct Candidate {
    double dist;
    std::uint32_t id;
    bool operator<(const Candidate& o) const { return dist < o.dist || (dist == o.dist && id < o.id); }
    bool operator>(const Candidate& o) const { return o < *this; }
  };

  double distance(std::span<const double> q, std::uint32_t node) const;
  double node_distance(std::uint32_t a, std::uint32_t b) const;
  std::vector<Candidate> search_layer(std::span<const double> q, const std::vector<Candidate>& entries,
                                      std::size_t ef, int level) const;
  std::vector<Candidate> select_neighbors(std::vector<Candidate> candidates, std::size_t m) const;
  void insert(std::uint32_t node, int level);

  EmbeddingDb db_;
  AnnParams params_;
  std::vector<int> levels_;
  std::vector<std::vector<std::vector<std::uint32_t>>> links_;  // node -> level -> neighbors
  std::size_t entry_ = 0;
  int max_level_ = -1;
  bool built_ = false;
};

}  // namespace trajsv::retrieval
