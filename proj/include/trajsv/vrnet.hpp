#pragma once

// Video encoder over a set of clip vectors. Built from the multihead
// attention block
//
//   MAB(X, Y) = LayerNorm(H + rFF(H)),  H = LayerNorm(X + MultiHead(X, Y, Y))
//
// and its self-attention form MSB(X) = MAB(X, X). The encoder is two stacked
// MSBs; the decoder pools with a trainable seed query:
// v = rFF(MSB(MAB(s, E))).
//
// Batches hold B videos of exactly n clip rows each, stacked vertically.

#include <string>
#include <vector>

#include "trajsv/nn.hpp"

namespace trajsv::vrnet {

using tensor::Index;
using tensor::Matrix;
using tensor::ParamStore;
using tensor::Tensor;

/// Seed-vector attention (default) or the mean-pool ablation.
enum class Pooling { attention, mean };

struct VRNetConfig {
  int n = 16;    // clips per video
  int d5 = 640;  // clip vector width
  std::vector<int> enc_dims = {1280, 1280};
  int d = 128;  // video embedding width
  int heads = 2;
  Pooling pooling = Pooling::attention;

  int encoder_out() const { return enc_dims.empty() ? d5 : enc_dims.back(); }
  void validate() const;
};

/// Registers the parameters of one MAB under `prefix`. When dx != dm the
/// residual path gets a learned projection `prefix.res`.
void init_mab(ParamStore& store, const std::string& prefix, Index dx, Index dy, Index dm, Rng& rng);

/// X has sets of `x_block` rows, Y has sets of `y_block` rows (same set count).
Tensor mab(const Tensor& x, const Tensor& y, const ParamStore& store, const std::string& prefix, int heads,
           Index x_block, Index y_block);

Tensor msb(const Tensor& x, const ParamStore& store, const std::string& prefix, int heads, Index block);

void init_params(ParamStore& store, const VRNetConfig& cfg, Rng& rng);

/// (B*n x d5) -> (B*n x encoder_out)
Tensor encode_video(const Tensor& clips, const ParamStore& store, const VRNetConfig& cfg);

/// (B*n x encoder_out) -> (B x d)
Tensor decode_video(const Tensor& encoded, const ParamStore& store, const VRNetConfig& cfg);

/// encode + decode, or the mean-pool ablation. (B*n x d5) -> (B x d)
Tensor video_embedding(const Tensor& clips, const ParamStore& store, const VRNetConfig& cfg);

}  // namespace trajsv::vrnet
