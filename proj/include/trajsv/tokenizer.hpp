#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "trajsv/geom.hpp"

namespace trajsv::tok {

using TokenId = std::int32_t;

inline constexpr TokenId kPadToken = 0;

/// Jaccard-deduplicated table of representative segment matrices. Token ids
/// are positions in `reps()`; token 0 is always the all-zero (padding) matrix.
/// A cell -> token inverted index restricts lookups to representatives that
/// share at least one cell with the probe.
class TokenVocabulary {
 public:
  TokenVocabulary() = default;
  TokenVocabulary(int grid_h, int grid_w, double jaccard_threshold);

  double threshold() const { return threshold_; }
  int grid_h() const { return grid_h_; }
  int grid_w() const { return grid_w_; }
  std::size_t size() const { return reps_.size(); }
  const std::vector<geom::SegmentMatrix>& reps() const { return reps_; }

  /// First representative (in id order) with jaccard >= threshold, or -1.
  TokenId first_match(const geom::SegmentMatrix& m) const;

  /// Representative with the highest jaccard; ties go to the lowest id.
  TokenId best_match(const geom::SegmentMatrix& m) const;

  /// Token used at inference: first match, else best match. Memoized
  /// matrices skip the scan.
  TokenId lookup(const geom::SegmentMatrix& m) const;

  /// Records the lookup result of each matrix so identical probes are O(1).
  /// Cleared whenever a representative is added.
  void memoize(std::span<const geom::SegmentMatrix> matrices);
  std::size_t memo_size() const { return memo_.size(); }

  /// Build-time scan step: returns the matching token or appends `m` as a new one.
  TokenId assign_or_insert(const geom::SegmentMatrix& m);

  void save(const std::filesystem::path& path) const;
  static TokenVocabulary load(const std::filesystem::path& path);

  bool operator==(const TokenVocabulary& other) const {
    return grid_h_ == other.grid_h_ && grid_w_ == other.grid_w_ && threshold_ == other.threshold_ &&
           reps_ == other.reps_;
  }

 private:
  friend TokenVocabulary build_vocabulary(std::span<const geom::SegmentMatrix>, int, int, double,
                                          std::vector<TokenId>*);

  int grid_h_ = 0;
  int grid_w_ = 0;
  double threshold_ = 0.3;
  std::vector<geom::SegmentMatrix> reps_;
  std::vector<std::vector<TokenId>> postings_;  // cell -> ids, ascending
  std::unordered_map<std::string, TokenId> memo_;  // raw matrix words -> token

  struct Match {
    TokenId first = -1;
    TokenId best = 0;
  };
  Match scan(const geom::SegmentMatrix& m) const;
  void index_last();
  void check_dims(const geom::SegmentMatrix& m) const;
};

/// Scans `matrices` in order; each one joins the first representative with
/// jaccard >= threshold or becomes a new representative. If `assigned` is
/// non-null it receives the token id chosen for every input matrix. The
/// inputs are memoized: their build-time id equals their lookup() id.
TokenVocabulary build_vocabulary(std::span<const geom::SegmentMatrix> matrices, int grid_h,
                                 int grid_w, double threshold,
                                 std::vector<TokenId>* assigned = nullptr);

/// Maps matrices to token ids without mutating the vocabulary. Matrices with
/// no representative above threshold map to their most similar representative.
std::vector<TokenId> tokenize(std::span<const geom::SegmentMatrix> matrices,
                              const TokenVocabulary& vocab);

TokenId tokenize_one(const geom::SegmentMatrix& m, const TokenVocabulary& vocab);

}  // namespace trajsv::tok
