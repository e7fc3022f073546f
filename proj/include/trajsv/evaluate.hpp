#pragma once

// Retrieval evaluation: the database holds the original test videos, each
// query is a noised copy of one of them, and we score where the original
// lands in the ranking.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "trajsv/hnsw.hpp"
#include "trajsv/model.hpp"
#include "trajsv/synth.hpp"

namespace trajsv::eval {

struct EvalOptions {
  std::vector<double> deltas = {0.5, 0.55, 0.6};
  std::uint64_t seed = 11;
  bool use_exact = true;
  retrieval::Metric metric = retrieval::Metric::cosine;
  retrieval::AnnParams ann;
};

struct DeltaResult {
  double delta = 0.0;
  double hr_at_1 = 0.0;
  double mrr = 0.0;
};

struct EvalReport {
  std::vector<DeltaResult> results;
  std::size_t query_count = 0;
  bool exact = true;
  retrieval::AnnParams index_params;
  std::string checkpoint_id;

  const DeltaResult& at(double delta) const;
  /// Keys of "results" are the shortest round-trip spelling of each delta.
  std::string to_json() const;
};

std::string delta_key(double delta);

/// 1/rank; a miss (rank 0) contributes 0.
double reciprocal_rank(std::size_t rank);

/// HR@1 and MRR over 1-based ranks (0 = not retrieved).
DeltaResult summarize_ranks(double delta, const std::vector<std::size_t>& ranks);

/// Row i of `queries` should retrieve row i of `database`.
std::vector<std::size_t> exact_ranks(const tensor::Matrix& database, const tensor::Matrix& queries,
                                     retrieval::Metric metric);

/// FNV-1a 64 over the file bytes, as 16 hex digits.
std::string file_fingerprint(const std::filesystem::path& path);

/// Throws ConfigError when `test_videos` is empty or the pool is empty.
EvalReport evaluate_retrieval(const model::TrajSVModel& model, const model::TokenizerConfig& tok,
                              const tok::TokenVocabulary& vocab, const std::vector<geom::Video>& test_videos,
                              const synth::SamplePool& pool, const EvalOptions& options,
                              const std::string& checkpoint_id = {});

}  // namespace trajsv::eval
