#include "trajsv/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include <json.hpp>

#include "trajsv/dataset_io.hpp"
#include "trajsv/error.hpp"
#include "trajsv/param_store.hpp"

namespace trajsv::retrieval {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

std::filesystem::path with_suffix(const std::filesystem::path& stem, const char* suffix) {
  return std::filesystem::path(stem.string() + suffix);
}

}  // namespace

const char* to_string(Metric metric) { return metric == Metric::cosine ? "cosine" : "dot"; }

Metric metric_from_string(const std::string& s) {
  if (s == "cosine") return Metric::cosine;
  if (s == "dot") return Metric::dot;
  throw ConfigError("unknown similarity metric '" + s + "'");
}

EmbeddingDb::EmbeddingDb(std::size_t dim, Metric metric) : dim_(dim), metric_(metric) {
  if (dim == 0) throw InvalidArgument("embedding dimension must be positive");
}

void EmbeddingDb::add(const std::string& id, std::span<const double> vec) {
  if (vec.size() != dim_) {
    throw InvalidArgument("embedding for '" + id + "' has dimension " + std::to_string(vec.size()) +
                          ", database expects " + std::to_string(dim_));
  }
  if (std::find(ids_.begin(), ids_.end(), id) != ids_.end()) {
    throw InvalidArgument("duplicate embedding id '" + id + "'");
  }
  const auto prepared = prepare_query(vec);
  ids_.push_back(id);
  data_.insert(data_.end(), prepared.begin(), prepared.end());
}

void EmbeddingDb::add_rows(const std::vector<std::string>& ids, const Matrix& rows) {
  if (static_cast<std::size_t>(rows.rows()) != ids.size()) {
    throw InvalidArgument("add_rows: id count does not match row count");
  }
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto row = rows.row(static_cast<Eigen::Index>(i));
    add(ids[i], std::span<const double>(row.data(), static_cast<std::size_t>(row.size())));
  }
}

std::vector<double> EmbeddingDb::prepare_query(std::span<const double> query) const {
  if (query.size() != dim_) {
    throw InvalidArgument("query has dimension " + std::to_string(query.size()) + ", database expects " +
                          std::to_string(dim_));
  }
  std::vector<double> out(query.begin(), query.end());
  if (metric_ == Metric::cosine) {
    const double norm = std::sqrt(dot(out, out));
    if (norm > 0.0) {
      for (auto& v : out) v /= norm;
    }
  }
  return out;
}

double EmbeddingDb::similarity(std::size_t i, std::span<const double> prepared_query) const {
  return dot(vector(i), prepared_query);
}

void EmbeddingDb::save(const std::filesystem::path& stem) const {
  tensor::ParamStore store;
  Matrix m(static_cast<Eigen::Index>(size()), static_cast<Eigen::Index>(dim_));
  std::copy(data_.begin(), data_.end(), m.data());
  store.add("embeddings", std::move(m));
  store.save(with_suffix(stem, ".ckpt"), "embedding-db");
  nlohmann::json j = {{"ids", ids_}, {"metric", to_string(metric_)}, {"dim", dim_}};
  io::write_text(with_suffix(stem, ".ids.json"), j.dump(2) + "\n");
}

EmbeddingDb EmbeddingDb::load(const std::filesystem::path& stem) {
  std::string meta;
  auto store = tensor::ParamStore::load(with_suffix(stem, ".ckpt"), &meta);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_text(with_suffix(stem, ".ids.json")));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed embedding id manifest: ") + e.what());
  }
  const auto ids = j.at("ids").get<std::vector<std::string>>();
  const auto& m = store.at("embeddings").value();
  if (static_cast<std::size_t>(m.rows()) != ids.size()) throw DataError("embedding db ids and rows disagree");
  return from_prepared(static_cast<std::size_t>(m.cols()), metric_from_string(j.at("metric").get<std::string>()),
                       ids, std::vector<double>(m.data(), m.data() + m.size()));
}

EmbeddingDb EmbeddingDb::from_prepared(std::size_t dim, Metric metric, std::vector<std::string> ids,
                                       std::vector<double> data) {
  EmbeddingDb db(dim, metric);
  if (data.size() != ids.size() * dim) throw DataError("embedding rows and ids disagree");
  std::unordered_set<std::string> seen;
  for (const auto& id : ids) {
    if (!seen.insert(id).second) throw DataError("duplicate embedding id '" + id + "'");
  }
  db.ids_ = std::move(ids);
  db.data_ = std::move(data);
  return db;
}

std::vector<Hit> exact_topk(const EmbeddingDb& db, std::span<const double> query, std::size_t k) {
  if (k == 0) throw InvalidArgument("exact_topk: k must be at least 1");
  if (db.empty()) throw InvalidArgument("exact_topk: database is empty");
  const auto q = db.prepare_query(query);
  std::vector<double> sims(db.size());
  for (std::size_t i = 0; i < db.size(); ++i) sims[i] = db.similarity(i, q);
  std::vector<std::size_t> order(db.size());
  std::iota(order.begin(), order.end(), 0);
  const auto take = std::min(k, db.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                    [&](std::size_t a, std::size_t b) { return sims[a] > sims[b] || (sims[a] == sims[b] && a < b); });
  std::vector<Hit> hits;
  hits.reserve(take);
  for (std::size_t i = 0; i < take; ++i) hits.push_back({order[i], db.ids()[order[i]], sims[order[i]]});
  return hits;
}

std::size_t exact_rank(const EmbeddingDb& db, std::span<const double> query, std::size_t target) {
  if (target >= db.size()) throw InvalidArgument("exact_rank: target outside database");
  const auto q = db.prepare_query(query);
  const double s_target = db.similarity(target, q);
  std::size_t rank = 1;
  for (std::size_t i = 0; i < db.size(); ++i) {
    if (i == target) continue;
    const double s = db.similarity(i, q);
    if (s > s_target || (s == s_target && i < target)) ++rank;
  }
  return rank;
}

}  // namespace trajsv::retrieval
