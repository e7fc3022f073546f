#pragma once

// Embedding database and exact (full-scan) nearest-neighbor search.

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "trajsv/tensor.hpp"

namespace trajsv::retrieval {

using tensor::Matrix;

enum class Metric { cosine, dot };

struct Hit {
  std::size_t index = 0;  // insertion position in the database
  std::string id;
  double similarity = 0.0;
};

/// Ordered (video_id, vector) entries. With `normalized` set, vectors are
/// stored unit-length so cosine similarity is a dot product.
class EmbeddingDb {
 public:
  EmbeddingDb() = default;
  EmbeddingDb(std::size_t dim, Metric metric);

  /// Throws InvalidArgument on a duplicate id or a dimension mismatch.
  void add(const std::string& id, std::span<const double> vec);
  void add_rows(const std::vector<std::string>& ids, const Matrix& rows);

  std::size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }
  std::size_t dim() const { return dim_; }
  Metric metric() const { return metric_; }
  bool normalized() const { return metric_ == Metric::cosine; }
  const std::vector<std::string>& ids() const { return ids_; }
  std::span<const double> vector(std::size_t i) const {
    return {data_.data() + i * dim_, dim_};
  }

  /// Query vector in database space (unit-normalized for cosine).
  std::vector<double> prepare_query(std::span<const double> query) const;
  double similarity(std::size_t i, std::span<const double> prepared_query) const;

  /// Writes `<stem>.ckpt` (checkpoint tensor format, one parameter "embeddings")
  /// and `<stem>.ids.json` (ordered ids, metric).
  void save(const std::filesystem::path& stem) const;
  static EmbeddingDb load(const std::filesystem::path& stem);

  /// Rebuild from rows already in database space (no renormalization).
  static EmbeddingDb from_prepared(std::size_t dim, Metric metric, std::vector<std::string> ids,
                                   std::vector<double> data);

 private:
  std::size_t dim_ = 0;
  Metric metric_ = Metric::cosine;
  std::vector<std::string> ids_;
  std::vector<double> data_;
};

/// Top-k by descending similarity; ties keep insertion order. k larger than
/// the database returns every entry.
std::vector<Hit> exact_topk(const EmbeddingDb& db, std::span<const double> query, std::size_t k);

/// 1-based rank of entry `target` for `query` under the same ordering as exact_topk.
std::size_t exact_rank(const EmbeddingDb& db, std::span<const double> query, std::size_t target);

const char* to_string(Metric metric);
Metric metric_from_string(const std::string& s);

}  // namespace trajsv::retrieval
