#include "trajsv/hnsw.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <queue>

#include "trajsv/binary_io.hpp"
#include "trajsv/error.hpp"
#include "trajsv/rng.hpp"

namespace trajsv::retrieval {

namespace {
constexpr char kMagic[8] = {'T', 'S', 'V', 'H', 'N', 'S', 'W', '\0'};
constexpr std::uint32_t kVersion = 1;
}  // namespace

void AnnParams::validate() const {
  if (M < 2) throw ConfigError("index M must be at least 2");
  if (ef_construction < 1 || ef_search < 1) throw ConfigError("index ef values must be positive");
}

double AnnIndex::distance(std::span<const double> q, std::uint32_t node) const {
  return -db_.similarity(node, q);
}

double AnnIndex::node_distance(std::uint32_t a, std::uint32_t b) const {
  return -db_.similarity(a, db_.vector(b));
}

std::vector<AnnIndex::Candidate> AnnIndex::search_layer(std::span<const double> q,
                                                        const std::vector<Candidate>& entries, std::size_t ef,
                                                        int level) const {
  std::vector<char> visited(db_.size(), 0);
  std::priority_queue<Candidate, std::vector<Candidate>, std::greater<>> frontier;  // nearest first
  std::priority_queue<Candidate> best;                                              // farthest on top
  for (const auto& e : entries) {
    if (visited[e.id]) continue;
    visited[e.id] = 1;
    frontier.push(e);
    best.push(e);
    if (best.size() > ef) best.pop();
  }
  while (!frontier.empty()) {
    const Candidate c = frontier.top();
    frontier.pop();
    if (best.size() >= ef && best.top() < c) break;
    for (const auto nb : links_[c.id][static_cast<std::size_t>(level)]) {
      if (visited[nb]) continue;
      visited[nb] = 1;
      const Candidate cand{distance(q, nb), nb};
      if (best.size() < ef || cand < best.top()) {
        frontier.push(cand);
        best.push(cand);
        if (best.size() > ef) best.pop();
      }
    }
  }
  std::vector<Candidate> out;
  out.reserve(best.size());
  while (!best.empty()) {
    out.push_back(best.top());
    best.pop();
  }
  std::reverse(out.begin(), out.end());
  return out;
}

// Keep a candidate only if it is closer to the base point than to every
// neighbor already kept; top up with the pruned ones if fewer than m survive.
std::vector<AnnIndex::Candidate> AnnIndex::select_neighbors(std::vector<Candidate> candidates,
                                                            std::size_t m) const {
  std::sort(candidates.begin(), candidates.end());
  if (candidates.size() <= m) return candidates;
  std::vector<Candidate> kept;
  std::vector<Candidate> pruned;
  for (const auto& c : candidates) {
    if (kept.size() >= m) break;
    bool diverse = true;
    for (const auto& k : kept) {
      if (node_distance(c.id, k.id) < c.dist) {
        diverse = false;
        break;
      }
    }
    (diverse ? kept : pruned).push_back(c);
  }
  for (std::size_t i = 0; kept.size() < m && i < pruned.size(); ++i) kept.push_back(pruned[i]);
  std::sort(kept.begin(), kept.end());
  return kept;
}

void AnnIndex::insert(std::uint32_t node, int level) {
  links_[node].assign(static_cast<std::size_t>(level) + 1, {});
  if (max_level_ < 0) {
    entry_ = node;
    max_level_ = level;
    return;
  }
  const auto q = db_.vector(node);
  std::vector<Candidate> eps{{distance(q, static_cast<std::uint32_t>(entry_)), static_cast<std::uint32_t>(entry_)}};
  for (int lc = max_level_; lc > level; --lc) eps = {search_layer(q, eps, 1, lc).front()};

  for (int lc = std::min(level, max_level_); lc >= 0; --lc) {
    auto found = search_layer(q, eps, params_.ef_construction, lc);
    // New nodes also take up to 2M links at layer 0.
    const std::size_t cap = lc == 0 ? 2 * params_.M : params_.M;
    const auto chosen = select_neighbors(found, cap);
    auto& mine = links_[node][static_cast<std::size_t>(lc)];
    for (const auto& c : chosen) {
      mine.push_back(c.id);
      auto& theirs = links_[c.id][static_cast<std::size_t>(lc)];
      theirs.push_back(node);
      if (theirs.size() > cap) {
        std::vector<Candidate> pool;
        pool.reserve(theirs.size());
        for (const auto nb : theirs) pool.push_back({node_distance(c.id, nb), nb});
        const auto shrunk = select_neighbors(std::move(pool), cap);
        theirs.clear();
        for (const auto& s : shrunk) theirs.push_back(s.id);
      }
    }
    eps = std::move(found);
  }
  if (level > max_level_) {
    max_level_ = level;
    entry_ = node;
  }
}

AnnIndex AnnIndex::build(const EmbeddingDb& db, const AnnParams& params) {
  params.validate();
  if (db.size() > std::numeric_limits<std::uint32_t>::max()) throw InvalidArgument("database too large");
  AnnIndex index;
  index.db_ = db;
  index.params_ = params;
  index.levels_.resize(db.size());
  index.links_.resize(db.size());
  Rng rng(derive_seed(params.seed, 0x4e5));
  const double ml = 1.0 / std::log(static_cast<double>(params.M));
  for (std::size_t i = 0; i < db.size(); ++i) {
    const double u = 1.0 - uniform01(rng);  // (0, 1]
    const int level = static_cast<int>(std::floor(-std::log(u) * ml));
    index.levels_[i] = level;
    index.insert(static_cast<std::uint32_t>(i), level);
  }
  index.built_ = true;
  return index;
}

std::vector<Hit> AnnIndex::query(std::span<const double> vec, std::size_t k, std::size_t ef_search) const {
  if (!built_) throw StateError("ann index queried before build");
  if (k == 0) throw InvalidArgument("ann query: k must be at least 1");
  if (ef_search < k) throw InvalidArgument("ann query: ef_search must be >= k");
  if (db_.empty()) return {};
  const auto q = db_.prepare_query(vec);
  std::vector<Candidate> eps{{distance(q, static_cast<std::uint32_t>(entry_)), static_cast<std::uint32_t>(entry_)}};
  for (int lc = max_level_; lc > 0; --lc) eps = {search_layer(q, eps, 1, lc).front()};
  auto found = search_layer(q, eps, ef_search, 0);
  if (found.size() > k) found.resize(k);
  std::vector<Hit> hits;
  hits.reserve(found.size());
  for (const auto& c : found) hits.push_back({c.id, db_.ids()[c.id], -c.dist});
  return hits;
}

void AnnIndex::save(const std::filesystem::path& path) const {
  if (!built_) throw StateError("cannot save an unbuilt index");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open index file for writing: " + path.string());
  out.write(kMagic, sizeof kMagic);
  bin::write_u32(out, kVersion);
  bin::write_u64(out, params_.M);
  bin::write_u64(out, params_.ef_construction);
  bin::write_u64(out, params_.ef_search);
  bin::write_u64(out, params_.seed);
  bin::write_string(out, to_string(db_.metric()));
  bin::write_u64(out, db_.dim());
  bin::write_u64(out, db_.size());
  for (std::size_t i = 0; i < db_.size(); ++i) {
    bin::write_string(out, db_.ids()[i]);
    for (const double v : db_.vector(i)) bin::write_f64(out, v);
  }
  bin::write_u64(out, entry_);
  bin::write_u32(out, static_cast<std::uint32_t>(max_level_ + 1));
  for (std::size_t i = 0; i < db_.size(); ++i) {
    bin::write_u32(out, static_cast<std::uint32_t>(levels_[i]));
    for (const auto& layer : links_[i]) {
      bin::write_u32(out, static_cast<std::uint32_t>(layer.size()));
      for (const auto nb : layer) bin::write_u32(out, nb);
    }
  }
  if (!out) throw DataError("failed writing index file: " + path.string());
}

AnnIndex AnnIndex::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open index file: " + path.string());
  char magic[sizeof kMagic];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0) throw DataError("not an index file: " + path.string());
  if (bin::read_u32(in) != kVersion) throw DataError("unsupported index version");
  AnnIndex index;
  index.params_.M = bin::read_u64(in);
  index.params_.ef_construction = bin::read_u64(in);
  index.params_.ef_search = bin::read_u64(in);
  index.params_.seed = bin::read_u64(in);
  const auto metric = metric_from_string(bin::read_string(in, 64));
  const auto dim = bin::read_u64(in);
  const auto n = bin::read_u64(in);
  if (dim == 0 || dim > (1U << 20) || n > (1U << 28)) throw DataError("index header is implausible");
  std::vector<std::string> ids;
  std::vector<double> data;
  data.reserve(n * dim);
  for (std::uint64_t i = 0; i < n; ++i) {
    ids.push_back(bin::read_string(in, 4096));
    for (std::uint64_t j = 0; j < dim; ++j) data.push_back(bin::read_f64(in));
  }
  index.db_ = EmbeddingDb::from_prepared(dim, metric, std::move(ids), std::move(data));
  index.entry_ = bin::read_u64(in);
  index.max_level_ = static_cast<int>(bin::read_u32(in)) - 1;
  index.levels_.resize(n);
  index.links_.resize(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    index.levels_[i] = static_cast<int>(bin::read_u32(in));
    index.links_[i].resize(static_cast<std::size_t>(index.levels_[i]) + 1);
    for (auto& layer : index.links_[i]) {
      layer.resize(bin::read_u32(in));
      for (auto& nb : layer) {
        nb = bin::read_u32(in);
        if (nb >= n) throw DataError("index neighbor out of range");
      }
    }
  }
  if (n > 0 && index.entry_ >= n) throw DataError("index entry point out of range");
  index.built_ = true;
  return index;
}

}  // namespace trajsv::retrieval
