#include "trajsv/crnet.hpp"

#include <cmath>
#include <string>

#include "trajsv/error.hpp"

namespace trajsv::crnet {

using namespace tensor;

namespace {

std::string layer_prefix(int layer) { return "crnet.l" + std::to_string(layer); }

int layer_input_dim(const CRNetConfig& cfg, int layer) { return layer == 0 ? cfg.d1 : cfg.d2; }

}  // namespace

void CRNetConfig::validate() const {
  if (d1 <= 0 || d2 <= 0 || d3 <= 0 || d4 <= 0 || m <= 0 || heads <= 0 || layers <= 0) {
    throw ConfigError("crnet dimensions, m, heads and layers must be positive");
  }
  if (d1 % heads != 0 || d2 % heads != 0) throw ConfigError("crnet head count must divide d1 and d2");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("crnet dropout must lie in [0, 1)");
}

void init_params(ParamStore& store, const CRNetConfig& cfg, std::size_t vocab_size, Rng& rng) {
  cfg.validate();
  if (vocab_size == 0) throw InvalidArgument("vocabulary size must be positive");
  store.add("crnet.tok_embed", nn::normal(static_cast<Index>(vocab_size), cfg.d1, 0.1, rng));
  store.add("crnet.pos_embed", nn::normal(cfg.m, cfg.d1, 0.1, rng));
  for (int l = 0; l < cfg.layers; ++l) {
    const auto p = layer_prefix(l);
    const int din = layer_input_dim(cfg, l);
    store.add(p + ".wq", nn::glorot(din, din, rng));
    store.add(p + ".wk", nn::glorot(din, din, rng));
    store.add(p + ".wv", nn::glorot(din, din, rng));
    store.add(p + ".wo", nn::glorot(din, cfg.d2, rng));
    if (din != cfg.d2) store.add(p + ".res", nn::glorot(din, cfg.d2, rng));
    nn::init_layer_norm(store, p + ".ln1", cfg.d2);
    if (l + 1 < cfg.layers) {
      nn::init_ffn(store, p + ".ff", cfg.d2, cfg.d2, cfg.d2, rng);
      nn::init_layer_norm(store, p + ".ln2", cfg.d2);
    }
  }
  nn::init_ffn(store, "crnet.pool", cfg.d2, cfg.d2, cfg.d3, rng);
}

Tensor embed_segments(std::span<const int> tokens, const ParamStore& store, const CRNetConfig& cfg,
                      const ForwardContext& ctx) {
  if (tokens.empty() || tokens.size() % static_cast<std::size_t>(cfg.m) != 0) {
    throw InvalidArgument("embed_segments: token count must be a positive multiple of m");
  }
  const Index clips = static_cast<Index>(tokens.size()) / cfg.m;
  Tensor x = add(gather_rows(store.at("crnet.tok_embed"), tokens), tile_rows(store.at("crnet.pos_embed"), clips));
  if (ctx.training && cfg.dropout > 0.0) {
    if (!ctx.rng) throw InvalidArgument("embed_segments: training mode requires an rng");
    x = dropout(x, cfg.dropout, *ctx.rng);
  }
  return x;
}

Tensor multi_head_self_attention(const Tensor& x, const ParamStore& store, const CRNetConfig& cfg,
                                 int layer, std::span<const char> key_valid) {
  const auto p = layer_prefix(layer);
  const Tensor& wq = store.at(p + ".wq");
  if (x.cols() != wq.rows()) throw InvalidArgument("multi_head_self_attention: input width mismatch");
  if (x.rows() % cfg.m != 0) throw InvalidArgument("multi_head_self_attention: rows must be whole clips");
  const Index din = x.cols();
  AttentionShape shape;
  shape.heads = cfg.heads;
  shape.query_block = cfg.m;
  shape.key_block = cfg.m;
  shape.scale = 1.0 / std::sqrt(static_cast<double>(din) / cfg.heads);
  const Tensor heads = block_attention(matmul(x, wq), matmul(x, store.at(p + ".wk")),
                                       matmul(x, store.at(p + ".wv")), shape, key_valid);
  return matmul(heads, store.at(p + ".wo"));
}

Tensor pool_ffn(const Tensor& z, const ParamStore& store, const CRNetConfig& cfg) {
  return nn::ffn(block_mean_rows(z, cfg.m), store, "crnet.pool");
}

Tensor encode_clips(std::span<const int> tokens, const Matrix& visual, const ParamStore& store,
                    const CRNetConfig& cfg, const ForwardContext& ctx) {
  const Index clips = static_cast<Index>(tokens.size()) / cfg.m;
  if (visual.rows() != clips || visual.cols() != cfg.d4) {
    throw InvalidArgument("encode_clips: visual features must be " + std::to_string(clips) + "x" +
                          std::to_string(cfg.d4));
  }
  std::vector<char> key_valid;
  if (cfg.pad_mask) {
    key_valid.reserve(tokens.size());
    for (const int t : tokens) key_valid.push_back(t != 0 ? 1 : 0);
  }

  Tensor x = embed_segments(tokens, store, cfg, ctx);
  for (int l = 0; l < cfg.layers; ++l) {
    const auto p = layer_prefix(l);
    const Tensor attn = multi_head_self_attention(x, store, cfg, l, key_valid);
    const Tensor residual = store.contains(p + ".res") ? matmul(x, store.at(p + ".res")) : x;
    x = nn::layer_norm(add(residual, attn), store, p + ".ln1");
    if (l + 1 < cfg.layers) x = nn::layer_norm(add(x, nn::ffn(x, store, p + ".ff")), store, p + ".ln2");
  }
  Tensor t = pool_ffn(x, store, cfg);

  Matrix y = visual;
  if (cfg.features == FeatureMode::visual) t = scale(t, 0.0);
  if (cfg.features == FeatureMode::trajectory) y.setZero();
  const Tensor parts[] = {t, Tensor::constant(std::move(y))};
  return concat_cols(parts);
}

}  // namespace trajsv::crnet
