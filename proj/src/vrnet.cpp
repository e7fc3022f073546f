#include "trajsv/vrnet.hpp"

#include <cmath>

#include "trajsv/error.hpp"

namespace trajsv::vrnet {

using namespace tensor;

void VRNetConfig::validate() const {
  if (n < 1 || d5 < 1 || d < 1 || heads < 1) throw ConfigError("vrnet n, d5, d and heads must be positive");
  for (const int dim : enc_dims) {
    if (dim < 1) throw ConfigError("vrnet encoder dims must be positive");
    if (dim % heads != 0) throw ConfigError("vrnet head count must divide every encoder dim");
  }
  if (d % heads != 0) throw ConfigError("vrnet head count must divide the output dim");
}

void init_mab(ParamStore& store, const std::string& prefix, Index dx, Index dy, Index dm, Rng& rng) {
  store.add(prefix + ".wq", nn::glorot(dx, dm, rng));
  store.add(prefix + ".wk", nn::glorot(dy, dm, rng));
  store.add(prefix + ".wv", nn::glorot(dy, dm, rng));
  store.add(prefix + ".wo", nn::glorot(dm, dm, rng));
  if (dx != dm) store.add(prefix + ".res", nn::glorot(dx, dm, rng));
  nn::init_layer_norm(store, prefix + ".ln1", dm);
  nn::init_ffn(store, prefix + ".ff", dm, dm, dm, rng);
  nn::init_layer_norm(store, prefix + ".ln2", dm);
}

Tensor mab(const Tensor& x, const Tensor& y, const ParamStore& store, const std::string& prefix, int heads,
           Index x_block, Index y_block) {
  const Tensor& wq = store.at(prefix + ".wq");
  const Tensor& wk = store.at(prefix + ".wk");
  if (x.cols() != wq.rows() || y.cols() != wk.rows()) {
    throw InvalidArgument("mab(" + prefix + "): input widths do not match the block parameters");
  }
  const Index dm = wq.cols();
  AttentionShape shape;
  shape.heads = heads;
  shape.query_block = x_block;
  shape.key_block = y_block;
  shape.scale = 1.0 / std::sqrt(static_cast<double>(dm) / heads);
  const Tensor attended =
      matmul(block_attention(matmul(x, wq), matmul(y, wk), matmul(y, store.at(prefix + ".wv")), shape),
             store.at(prefix + ".wo"));
  const Tensor residual = store.contains(prefix + ".res") ? matmul(x, store.at(prefix + ".res")) : x;
  const Tensor h = nn::layer_norm(add(residual, attended), store, prefix + ".ln1");
  return nn::layer_norm(add(h, nn::ffn(h, store, prefix + ".ff")), store, prefix + ".ln2");
}

Tensor msb(const Tensor& x, const ParamStore& store, const std::string& prefix, int heads, Index block) {
  return mab(x, x, store, prefix, heads, block, block);
}

void init_params(ParamStore& store, const VRNetConfig& cfg, Rng& rng) {
  cfg.validate();
  if (cfg.pooling == Pooling::mean) {
    store.add("vrnet.meanpool.w", nn::glorot(cfg.d5, cfg.d, rng));
    store.add("vrnet.meanpool.b", Matrix::Zero(1, cfg.d));
    return;
  }
  Index din = cfg.d5;
  for (std::size_t i = 0; i < cfg.enc_dims.size(); ++i) {
    init_mab(store, "vrnet.enc" + std::to_string(i), din, din, cfg.enc_dims[i], rng);
    din = cfg.enc_dims[i];
  }
  store.add("vrnet.seed", nn::normal(1, cfg.d, 1.0 / std::sqrt(static_cast<double>(cfg.d)), rng));
  init_mab(store, "vrnet.dec.pool", cfg.d, din, cfg.d, rng);
  init_mab(store, "vrnet.dec.self", cfg.d, cfg.d, cfg.d, rng);
  nn::init_ffn(store, "vrnet.dec.out", cfg.d, cfg.d, cfg.d, rng);
}

Tensor encode_video(const Tensor& clips, const ParamStore& store, const VRNetConfig& cfg) {
  if (clips.rows() % cfg.n != 0) throw InvalidArgument("encode_video: rows must be whole videos of n clips");
  Tensor x = clips;
  for (std::size_t i = 0; i < cfg.enc_dims.size(); ++i) {
    x = msb(x, store, "vrnet.enc" + std::to_string(i), cfg.heads, cfg.n);
  }
  return x;
}

Tensor decode_video(const Tensor& encoded, const ParamStore& store, const VRNetConfig& cfg) {
  if (encoded.rows() % cfg.n != 0) throw InvalidArgument("decode_video: rows must be whole videos of n clips");
  const Index videos = encoded.rows() / cfg.n;
  const Tensor seeds = tile_rows(store.at("vrnet.seed"), videos);
  const Tensor pooled = mab(seeds, encoded, store, "vrnet.dec.pool", cfg.heads, 1, cfg.n);
  const Tensor refined = msb(pooled, store, "vrnet.dec.self", cfg.heads, 1);
  return nn::ffn(refined, store, "vrnet.dec.out");
}

Tensor video_embedding(const Tensor& clips, const ParamStore& store, const VRNetConfig& cfg) {
  if (cfg.pooling == Pooling::mean) {
    return add_row(matmul(block_mean_rows(clips, cfg.n), store.at("vrnet.meanpool.w")),
                   store.at("vrnet.meanpool.b"));
  }
  return decode_video(encode_video(clips, store, cfg), store, cfg);
}

}  // namespace trajsv::vrnet
