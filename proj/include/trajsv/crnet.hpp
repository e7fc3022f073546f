#pragma once

// Clip encoder: token + positional embedding, stacked multi-head
// self-attention over the segments of a clip, mean-pooled feed-forward
// reduction to a trajectory vector t, and fusion c = [t | y] with the frozen
// visual vector y.
//
// All functions operate on R clips at once: token/segment rows are stacked
// clip after clip (R*m rows) and attention runs independently per clip.

#include <span>
#include <vector>

#include "trajsv/nn.hpp"

namespace trajsv::crnet {

using nn::ForwardContext;
using tensor::Index;
using tensor::Matrix;
using tensor::ParamStore;
using tensor::Tensor;

/// Which halves of the clip vector carry signal (feature ablations).
enum class FeatureMode { both, trajectory, visual };

struct CRNetConfig {
  int d1 = 128;  // input embedding
  int d2 = 128;  // attention output
  int d3 = 128;  // trajectory representation
  int d4 = 512;  // visual feature
  int m = 16;    // segments per clip
  int heads = 2;
  int layers = 2;
  double dropout = 0.3;  // applied to the embedded input only
  bool pad_mask = false;
  FeatureMode features = FeatureMode::both;

  int d5() const { return d3 + d4; }
  void validate() const;
};

void init_params(ParamStore& store, const CRNetConfig& cfg, std::size_t vocab_size, Rng& rng);

/// Row i = token_table[tokens[i]] + pos_table[i mod m]; dropout in training mode.
Tensor embed_segments(std::span<const int> tokens, const ParamStore& store, const CRNetConfig& cfg,
                      const ForwardContext& ctx);

/// Concat(O_1..O_h) W^O for one layer; X holds whole clips of `m` rows each.
Tensor multi_head_self_attention(const Tensor& x, const ParamStore& store, const CRNetConfig& cfg,
                                 int layer, std::span<const char> key_valid = {});

/// t = relu(mean_rows(Z) W1 + b1) W2 + b2, one output row per clip.
Tensor pool_ffn(const Tensor& z, const ParamStore& store, const CRNetConfig& cfg);

/// Full clip encoder for R clips: `tokens` has R*m ids, `visual` is R x d4.
/// Returns R x d5 with the trajectory part first.
Tensor encode_clips(std::span<const int> tokens, const Matrix& visual, const ParamStore& store,
                    const CRNetConfig& cfg, const ForwardContext& ctx);

}  // namespace trajsv::crnet
