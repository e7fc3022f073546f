#include "trajsv/tokenizer.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

#include "trajsv/binary_io.hpp"
#include "trajsv/error.hpp"

namespace trajsv::tok {

namespace {

constexpr char kVocabMagic[8] = {'T', 'S', 'V', 'V', 'O', 'C', 'A', 'B'};
constexpr std::uint32_t kVocabVersion = 1;

// Cells set in `m`, in ascending bit order.
template <typename F>
void for_each_cell(const geom::SegmentMatrix& m, F&& f) {
  const auto words = m.words();
  for (std::size_t w = 0; w < words.size(); ++w) {
    for (std::uint64_t bits = words[w]; bits != 0; bits &= bits - 1) {
      f(w * 64 + static_cast<std::size_t>(std::countr_zero(bits)));
    }
  }
}

// Per-thread overlap counters, reset lazily through the touched list.
struct Scratch {
  std::vector<std::uint32_t> counts;
  std::vector<TokenId> touched;
};

thread_local Scratch scratch;

double jaccard_from_counts(std::size_t inter, std::size_t pa, std::size_t pb) {
  const std::size_t uni = pa + pb - inter;
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace

TokenVocabulary::TokenVocabulary(int grid_h, int grid_w, double jaccard_threshold)
    : grid_h_(grid_h), grid_w_(grid_w), threshold_(jaccard_threshold) {
  if (!(jaccard_threshold > 0.0 && jaccard_threshold <= 1.0)) {
    throw InvalidArgument("jaccard threshold must lie in (0, 1]");
  }
  reps_.emplace_back(grid_h, grid_w);
  postings_.resize(static_cast<std::size_t>(grid_h) * static_cast<std::size_t>(grid_w));
}

void TokenVocabulary::index_last() {
  const auto id = static_cast<TokenId>(reps_.size() - 1);
  for_each_cell(reps_.back(), [&](std::size_t cell) { postings_[cell].push_back(id); });
}

void TokenVocabulary::check_dims(const geom::SegmentMatrix& m) const {
  if (m.rows() != grid_h_ || m.cols() != grid_w_) {
    throw InvalidArgument("segment matrix dimensions differ from the vocabulary grid");
  }
}

// Every representative except the empty one is reachable through a shared
// cell, and a representative with no shared cell has jaccard 0 < threshold,
// so one pass over the postings of m's cells yields both answers.
TokenVocabulary::Match TokenVocabulary::scan(const geom::SegmentMatrix& m) const {
  check_dims(m);
  if (m.empty()) return {kPadToken, kPadToken};
  auto& [counts, touched] = scratch;
  if (counts.size() < reps_.size()) counts.resize(reps_.size(), 0);
  for_each_cell(m, [&](std::size_t cell) {
    for (const auto id : postings_[cell]) {
      if (counts[static_cast<std::size_t>(id)]++ == 0) touched.push_back(id);
    }
  });
  // With no shared cell every similarity is 0 and the lowest id (padding) wins.
  Match out;
  double best_sim = 0.0;
  for (const auto id : touched) {
    const auto k = static_cast<std::size_t>(id);
    const double sim = jaccard_from_counts(counts[k], m.popcount(), reps_[k].popcount());
    if (sim >= threshold_ && (out.first < 0 || id < out.first)) out.first = id;
    if (sim > best_sim || (sim == best_sim && id < out.best)) {
      best_sim = sim;
      out.best = id;
    }
    counts[k] = 0;
  }
  touched.clear();
  return out;
}

TokenId TokenVocabulary::first_match(const geom::SegmentMatrix& m) const { return scan(m).first; }

TokenId TokenVocabulary::best_match(const geom::SegmentMatrix& m) const { return scan(m).best; }

namespace {
std::string memo_key(const geom::SegmentMatrix& m) {
  const auto w = m.words();
  return std::string(reinterpret_cast<const char*>(w.data()), w.size_bytes());
}
}  // namespace

TokenId TokenVocabulary::lookup(const geom::SegmentMatrix& m) const {
  if (reps_.empty()) throw InvalidArgument("tokenize: empty vocabulary");
  if (!memo_.empty()) {
    check_dims(m);
    if (const auto it = memo_.find(memo_key(m)); it != memo_.end()) return it->second;
  }
  const auto match = scan(m);
  return match.first >= 0 ? match.first : match.best;
}

void TokenVocabulary::memoize(std::span<const geom::SegmentMatrix> matrices) {
  for (const auto& m : matrices) {
    auto key = memo_key(m);
    if (memo_.count(key)) continue;
    const TokenId id = lookup(m);
    memo_.emplace(std::move(key), id);
  }
}

TokenId TokenVocabulary::assign_or_insert(const geom::SegmentMatrix& m) {
  if (reps_.empty()) throw StateError("vocabulary is not initialized");
  const TokenId hit = first_match(m);
  if (hit >= 0) return hit;
  reps_.push_back(m);
  index_last();
  memo_.clear();
  return static_cast<TokenId>(reps_.size() - 1);
}

void TokenVocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open vocabulary file for writing: " + path.string());
  out.write(kVocabMagic, sizeof kVocabMagic);
  bin::write_u32(out, kVocabVersion);
  bin::write_f64(out, threshold_);
  bin::write_u32(out, static_cast<std::uint32_t>(grid_h_));
  bin::write_u32(out, static_cast<std::uint32_t>(grid_w_));
  bin::write_u64(out, reps_.size());
  for (const auto& rep : reps_) {
    const auto runs = rep.run_lengths();
    bin::write_u32(out, static_cast<std::uint32_t>(runs.size()));
    for (const auto r : runs) bin::write_u32(out, r);
  }
  if (!out) throw DataError("failed writing vocabulary file: " + path.string());
}

TokenVocabulary TokenVocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open vocabulary file: " + path.string());
  char magic[sizeof kVocabMagic];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kVocabMagic, sizeof magic) != 0) {
    throw DataError("not a vocabulary file: " + path.string());
  }
  if (bin::read_u32(in) != kVocabVersion) throw DataError("unsupported vocabulary version");
  TokenVocabulary vocab;
  vocab.threshold_ = bin::read_f64(in);
  vocab.grid_h_ = static_cast<int>(bin::read_u32(in));
  vocab.grid_w_ = static_cast<int>(bin::read_u32(in));
  const auto count = bin::read_u64(in);
  if (vocab.grid_h_ <= 0 || vocab.grid_w_ <= 0 || vocab.grid_h_ > 4096 || vocab.grid_w_ > 4096) {
    throw DataError("vocabulary grid dimensions are implausible");
  }
  vocab.postings_.resize(static_cast<std::size_t>(vocab.grid_h_) * static_cast<std::size_t>(vocab.grid_w_));
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto n = bin::read_u32(in);
    std::vector<std::uint32_t> runs(n);
    for (auto& r : runs) r = bin::read_u32(in);
    vocab.reps_.push_back(geom::SegmentMatrix::from_run_lengths(vocab.grid_h_, vocab.grid_w_, runs));
    vocab.index_last();
  }
  if (vocab.reps_.empty() || !vocab.reps_.front().empty()) {
    throw DataError("vocabulary file lacks the padding token");
  }
  return vocab;
}

TokenVocabulary build_vocabulary(std::span<const geom::SegmentMatrix> matrices, int grid_h,
                                 int grid_w, double threshold, std::vector<TokenId>* assigned) {
  TokenVocabulary vocab(grid_h, grid_w, threshold);
  if (assigned) assigned->clear();
  std::vector<TokenId> ids;
  ids.reserve(matrices.size());
  for (const auto& m : matrices) ids.push_back(vocab.assign_or_insert(m));
  // A matrix that joined token k failed every lower id when it was scanned,
  // and ids only grow, so k stays its first match in the final vocabulary.
  for (std::size_t i = 0; i < matrices.size(); ++i) vocab.memo_.emplace(memo_key(matrices[i]), ids[i]);
  if (assigned) *assigned = std::move(ids);
  return vocab;
}

TokenId tokenize_one(const geom::SegmentMatrix& m, const TokenVocabulary& vocab) { return vocab.lookup(m); }

std::vector<TokenId> tokenize(std::span<const geom::SegmentMatrix> matrices,
                              const TokenVocabulary& vocab) {
  std::vector<TokenId> ids;
  ids.reserve(matrices.size());
  for (const auto& m : matrices) ids.push_back(tokenize_one(m, vocab));
  return ids;
}

}  // namespace trajsv::tok
