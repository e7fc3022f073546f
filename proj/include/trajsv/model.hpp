#pragma once

// End-to-end video encoder: tokenized clips -> clip encoder -> video encoder.

#include <cstdint>
#include <span>
#include <vector>

#include "trajsv/crnet.hpp"
#include "trajsv/geom.hpp"
#include "trajsv/tokenizer.hpp"
#include "trajsv/vrnet.hpp"

namespace trajsv::model {

using tensor::Matrix;
using tensor::ParamStore;
using tensor::Tensor;

struct TokenizerConfig {
  geom::FieldSpec field;
  double segment_len = 1.0;
  double jaccard_threshold = 0.3;
  geom::RasterMode raster = geom::RasterMode::supercover;

  void validate() const;
};

struct ModelConfig {
  crnet::CRNetConfig crnet;
  vrnet::VRNetConfig vrnet;

  void validate() const;
};

/// How to pick n clips out of a longer video.
enum class WindowPolicy { prefix, random };

/// Model-ready view of one video: exactly n clips of m tokens plus their visual rows.
struct PreparedVideo {
  std::vector<int> tokens;  // n * m
  Matrix visual;            // n x d4
};

std::vector<geom::SegmentMatrix> clip_matrices(const geom::Clip& clip, const TokenizerConfig& tok, int m);

/// Segment matrices of every clip of every video, in dataset order.
std::vector<geom::SegmentMatrix> corpus_matrices(const std::vector<geom::Video>& videos,
                                                 const TokenizerConfig& tok, int m);

tok::TokenVocabulary build_corpus_vocabulary(const std::vector<geom::Video>& videos, const TokenizerConfig& tok,
                                             int m);

/// Clip indices used for a video of `clip_count` clips: cyclic repeat when
/// shorter than n, a contiguous window of n when longer.
std::vector<std::size_t> clip_window(std::size_t clip_count, int n, WindowPolicy policy, Rng* rng);

/// Requires every selected clip to carry a visual vector of width d4.
PreparedVideo prepare_video(const geom::Video& video, const TokenizerConfig& tok,
                            const tok::TokenVocabulary& vocab, const ModelConfig& cfg,
                            WindowPolicy policy = WindowPolicy::prefix, Rng* rng = nullptr);

class TrajSVModel {
 public:
  TrajSVModel(ModelConfig cfg, std::size_t vocab_size, std::uint64_t init_seed);
  /// Adopts existing parameters (e.g. from a checkpoint); names and shapes are verified.
  TrajSVModel(ModelConfig cfg, std::size_t vocab_size, ParamStore params);

  const ModelConfig& config() const { return cfg_; }
  std::size_t vocab_size() const { return vocab_size_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  /// (B*n x d5) clip vectors.
  Tensor clip_embeddings(std::span<const PreparedVideo> videos, const nn::ForwardContext& ctx) const;

  /// (B x d) video vectors, differentiable.
  Tensor encode(std::span<const PreparedVideo> videos, const nn::ForwardContext& ctx) const;

  /// Inference-mode embeddings (no graph, dropout off), processed in chunks.
  Matrix embed(std::span<const PreparedVideo> videos, std::size_t chunk = 32) const;

 private:
  ModelConfig cfg_;
  std::size_t vocab_size_;
  ParamStore params_;
};

}  // namespace trajsv::model
