#include "trajsv/diagnostics.hpp"

#include "trajsv/error.hpp"

namespace trajsv::diag {

std::vector<model::PreparedVideo> random_videos(const model::ModelConfig& cfg, std::size_t vocab_size,
                                                std::size_t count, Rng& rng) {
  if (vocab_size == 0) throw InvalidArgument("random_videos: empty vocabulary");
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<model::PreparedVideo> out(count);
  for (auto& v : out) {
    const auto rows = static_cast<std::size_t>(cfg.vrnet.n) * static_cast<std::size_t>(cfg.crnet.m);
    for (std::size_t i = 0; i < rows; ++i) v.tokens.push_back(static_cast<int>(uniform_index(rng, vocab_size)));
    v.visual.resize(cfg.vrnet.n, cfg.crnet.d4);
    for (tensor::Index i = 0; i < v.visual.size(); ++i) v.visual.data()[i] = normal(rng);
  }
  return out;
}

tensor::GradCheckReport check_model_gradients(const ModelGradCheckOptions& options) {
  if (options.batch < 2) throw InvalidArgument("gradient check needs a batch of at least two");
  model::TrajSVModel net(options.model, options.vocab_size, options.seed);
  Rng rng(derive_seed(options.seed, 0x9c));
  const auto videos = random_videos(options.model, options.vocab_size, 3 * options.batch, rng);
  const auto b = static_cast<tensor::Index>(options.batch);
  auto loss_fn = [&] {
    const auto emb = net.encode(videos, nn::ForwardContext{});
    return objective::triple_loss(
        {tensor::slice_rows(emb, 0, b), tensor::slice_rows(emb, b, b), tensor::slice_rows(emb, 2 * b, b)},
        options.loss);
  };
  return tensor::grad_check(loss_fn, net.params(), options.tol, options.h);
}

}  // namespace trajsv::diag
