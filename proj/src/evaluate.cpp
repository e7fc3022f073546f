#include "trajsv/evaluate.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "trajsv/error.hpp"

namespace trajsv::eval {

using tensor::Index;
using tensor::Matrix;

const DeltaResult& EvalReport::at(double delta) const {
  for (const auto& r : results) {
    if (r.delta == delta) return r;
  }
  throw InvalidArgument("report has no entry for delta " + delta_key(delta));
}

std::string delta_key(double delta) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, delta);
  return std::string(buf, res.ptr);
}

std::string EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["checkpoint_id"] = checkpoint_id;
  j["query_count"] = query_count;
  j["search"] = exact ? "exact" : "ann";
  j["index_params"] = {{"M", index_params.M},
                       {"ef_construction", index_params.ef_construction},
                       {"ef_search", index_params.ef_search},
                       {"seed", index_params.seed}};
  nlohmann::ordered_json res = nlohmann::ordered_json::object();
  for (const auto& r : results) res[delta_key(r.delta)] = {{"hr_at_1", r.hr_at_1}, {"mrr", r.mrr}};
  j["results"] = res;
  return j.dump(2) + "\n";
}

double reciprocal_rank(std::size_t rank) { return rank == 0 ? 0.0 : 1.0 / static_cast<double>(rank); }

DeltaResult summarize_ranks(double delta, const std::vector<std::size_t>& ranks) {
  DeltaResult r;
  r.delta = delta;
  if (ranks.empty()) return r;
  double hits = 0.0;
  double rr = 0.0;
  for (const auto k : ranks) {
    if (k == 1) hits += 1.0;
    rr += reciprocal_rank(k);
  }
  r.hr_at_1 = hits / static_cast<double>(ranks.size());
  r.mrr = rr / static_cast<double>(ranks.size());
  return r;
}

namespace {

retrieval::EmbeddingDb make_db(const Matrix& rows, retrieval::Metric metric) {
  retrieval::EmbeddingDb db(static_cast<std::size_t>(rows.cols()), metric);
  std::vector<std::string> ids;
  for (Index i = 0; i < rows.rows(); ++i) ids.push_back(std::to_string(i));
  db.add_rows(ids, rows);
  return db;
}

std::span<const double> row_span(const Matrix& m, Index i) {
  return {m.data() + i * m.cols(), static_cast<std::size_t>(m.cols())};
}

}  // namespace

std::vector<std::size_t> exact_ranks(const Matrix& database, const Matrix& queries, retrieval::Metric metric) {
  if (database.rows() != queries.rows()) throw InvalidArgument("exact_ranks: one query per database row");
  const auto db = make_db(database, metric);
  std::vector<std::size_t> ranks;
  ranks.reserve(static_cast<std::size_t>(queries.rows()));
  for (Index i = 0; i < queries.rows(); ++i) {
    ranks.push_back(retrieval::exact_rank(db, row_span(queries, i), static_cast<std::size_t>(i)));
  }
  return ranks;
}

std::string file_fingerprint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file for fingerprint: " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
  return hex;
}

EvalReport evaluate_retrieval(const model::TrajSVModel& model, const model::TokenizerConfig& tok,
                              const tok::TokenVocabulary& vocab, const std::vector<geom::Video>& test_videos,
                              const synth::SamplePool& pool, const EvalOptions& options,
                              const std::string& checkpoint_id) {
  if (test_videos.empty()) throw ConfigError("evaluation needs at least one test video");
  if (pool.empty()) throw ConfigError("evaluation needs a non-empty training pool");
  if (options.deltas.empty()) throw ConfigError("evaluation needs at least one delta");

  std::vector<model::PreparedVideo> originals;
  originals.reserve(test_videos.size());
  for (const auto& v : test_videos) originals.push_back(model::prepare_video(v, tok, vocab, model.config()));
  // Queries are embedded with the same chunking as the database so an
  // unmodified query reproduces its database row bit for bit.
  const Matrix database = model.embed(originals);

  EvalReport report;
  report.query_count = test_videos.size();
  report.exact = options.use_exact;
  report.index_params = options.ann;
  report.checkpoint_id = checkpoint_id;

  retrieval::AnnIndex index;
  if (!options.use_exact) index = retrieval::AnnIndex::build(make_db(database, options.metric), options.ann);

  for (const double delta : options.deltas) {
    const synth::NoiseRate rate(delta);
    const auto stream = derive_seed(options.seed, std::bit_cast<std::uint64_t>(delta));
    std::vector<model::PreparedVideo> queries;
    queries.reserve(test_videos.size());
    for (std::size_t i = 0; i < test_videos.size(); ++i) {
      Rng rng(derive_seed(stream, i));
      const auto q = synth::make_eval_query(test_videos[i], rate, pool, rng);
      queries.push_back(model::prepare_video(q, tok, vocab, model.config()));
    }
    const Matrix qemb = model.embed(queries);

    std::vector<std::size_t> ranks;
    if (options.use_exact) {
      ranks = exact_ranks(database, qemb, options.metric);
    } else {
      const auto k = std::min(index.size(), std::max<std::size_t>(1, options.ann.ef_search));
      for (Index i = 0; i < qemb.rows(); ++i) {
        const auto hits = index.query(row_span(qemb, i), k, std::max(k, options.ann.ef_search));
        std::size_t rank = 0;
        for (std::size_t h = 0; h < hits.size(); ++h) {
          if (hits[h].index == static_cast<std::size_t>(i)) {
            rank = h + 1;
            break;
          }
        }
        ranks.push_back(rank);
      }
    }
    report.results.push_back(summarize_ranks(delta, ranks));
  }
  return report;
}

}  // namespace trajsv::eval
