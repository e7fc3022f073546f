#include "trajsv/model.hpp"

#include <algorithm>

#include "trajsv/error.hpp"

namespace trajsv::model {

using tensor::Index;

void TokenizerConfig::validate() const {
  field.validate();
  if (!(segment_len > 0.0)) throw ConfigError("segment_len must be positive");
  if (!(jaccard_threshold > 0.0 && jaccard_threshold <= 1.0)) {
    throw ConfigError("jaccard_threshold must lie in (0, 1]");
  }
}

void ModelConfig::validate() const {
  crnet.validate();
  vrnet.validate();
  if (vrnet.d5 != crnet.d5()) throw ConfigError("vrnet.d5 must equal crnet d3 + d4");
}

std::vector<geom::SegmentMatrix> clip_matrices(const geom::Clip& clip, const TokenizerConfig& tok, int m) {
  return geom::segment_clip(clip, tok.field, tok.segment_len, m, tok.raster);
}

std::vector<geom::SegmentMatrix> corpus_matrices(const std::vector<geom::Video>& videos,
                                                 const TokenizerConfig& tok, int m) {
  std::vector<geom::SegmentMatrix> out;
  for (const auto& v : videos) {
    for (const auto& c : v.clips) {
      auto mats = clip_matrices(c, tok, m);
      std::move(mats.begin(), mats.end(), std::back_inserter(out));
    }
  }
  return out;
}

tok::TokenVocabulary build_corpus_vocabulary(const std::vector<geom::Video>& videos, const TokenizerConfig& tok,
                                             int m) {
  const auto mats = corpus_matrices(videos, tok, m);
  return tok::build_vocabulary(mats, tok.field.grid_h(), tok.field.grid_w(), tok.jaccard_threshold);
}

std::vector<std::size_t> clip_window(std::size_t clip_count, int n, WindowPolicy policy, Rng* rng) {
  if (clip_count == 0) throw DataError("video has no clips");
  const auto want = static_cast<std::size_t>(n);
  std::vector<std::size_t> idx;
  idx.reserve(want);
  if (clip_count <= want) {
    for (std::size_t i = 0; i < want; ++i) idx.push_back(i % clip_count);
    return idx;
  }
  std::size_t start = 0;
  if (policy == WindowPolicy::random) {
    if (!rng) throw InvalidArgument("clip_window: random policy requires an rng");
    start = uniform_index(*rng, clip_count - want + 1);
  }
  for (std::size_t i = 0; i < want; ++i) idx.push_back(start + i);
  return idx;
}

PreparedVideo prepare_video(const geom::Video& video, const TokenizerConfig& tok,
                            const tok::TokenVocabulary& vocab, const ModelConfig& cfg, WindowPolicy policy,
                            Rng* rng) {
  const int m = cfg.crnet.m;
  const int d4 = cfg.crnet.d4;
  const auto window = clip_window(video.clips.size(), cfg.vrnet.n, policy, rng);
  PreparedVideo out;
  out.tokens.reserve(window.size() * static_cast<std::size_t>(m));
  out.visual.resize(static_cast<Index>(window.size()), d4);
  for (std::size_t row = 0; row < window.size(); ++row) {
    const auto& clip = video.clips[window[row]];
    if (clip.visual.size() != static_cast<std::size_t>(d4)) {
      throw DataError("clip '" + clip.clip_id + "' lacks a visual vector of width " + std::to_string(d4));
    }
    for (const auto id : tok::tokenize(clip_matrices(clip, tok, m), vocab)) out.tokens.push_back(id);
    for (int j = 0; j < d4; ++j) out.visual(static_cast<Index>(row), j) = clip.visual[static_cast<std::size_t>(j)];
  }
  return out;
}

TrajSVModel::TrajSVModel(ModelConfig cfg, std::size_t vocab_size, std::uint64_t init_seed)
    : cfg_(std::move(cfg)), vocab_size_(vocab_size) {
  cfg_.validate();
  Rng rng(derive_seed(init_seed, 0x1417));
  crnet::init_params(params_, cfg_.crnet, vocab_size_, rng);
  vrnet::init_params(params_, cfg_.vrnet, rng);
}

TrajSVModel::TrajSVModel(ModelConfig cfg, std::size_t vocab_size, ParamStore params)
    : cfg_(std::move(cfg)), vocab_size_(vocab_size), params_(std::move(params)) {
  cfg_.validate();
  const TrajSVModel reference(cfg_, vocab_size_, 0);
  if (reference.params_.size() != params_.size()) {
    throw DataError("checkpoint parameters do not match the model configuration");
  }
  for (const auto& [name, t] : reference.params_.items()) {
    if (!params_.contains(name)) throw DataError("checkpoint lacks parameter '" + name + "'");
    const auto& have = params_.at(name);
    if (have.rows() != t.rows() || have.cols() != t.cols()) {
      throw DataError("checkpoint parameter '" + name + "' has the wrong shape");
    }
  }
}

Tensor TrajSVModel::clip_embeddings(std::span<const PreparedVideo> videos, const nn::ForwardContext& ctx) const {
  if (videos.empty()) throw InvalidArgument("encode: empty batch");
  const auto per_video = static_cast<std::size_t>(cfg_.vrnet.n) * static_cast<std::size_t>(cfg_.crnet.m);
  std::vector<int> tokens;
  tokens.reserve(videos.size() * per_video);
  Matrix visual(static_cast<Index>(videos.size()) * cfg_.vrnet.n, cfg_.crnet.d4);
  Index row = 0;
  for (const auto& v : videos) {
    if (v.tokens.size() != per_video || v.visual.rows() != cfg_.vrnet.n || v.visual.cols() != cfg_.crnet.d4) {
      throw InvalidArgument("encode: prepared video does not match the model configuration");
    }
    tokens.insert(tokens.end(), v.tokens.begin(), v.tokens.end());
    visual.middleRows(row, cfg_.vrnet.n) = v.visual;
    row += cfg_.vrnet.n;
  }
  return crnet::encode_clips(tokens, visual, params_, cfg_.crnet, ctx);
}

Tensor TrajSVModel::encode(std::span<const PreparedVideo> videos, const nn::ForwardContext& ctx) const {
  return vrnet::video_embedding(clip_embeddings(videos, ctx), params_, cfg_.vrnet);
}

Matrix TrajSVModel::embed(std::span<const PreparedVideo> videos, std::size_t chunk) const {
  tensor::NoGradGuard no_grad;
  Matrix out(static_cast<Index>(videos.size()), cfg_.vrnet.d);
  const nn::ForwardContext ctx;
  for (std::size_t begin = 0; begin < videos.size(); begin += chunk) {
    const auto count = std::min(chunk, videos.size() - begin);
    out.middleRows(static_cast<Index>(begin), static_cast<Index>(count)) =
        encode(videos.subspan(begin, count), ctx).value();
  }
  return out;
}

}  // namespace trajsv::model
