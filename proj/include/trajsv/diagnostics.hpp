#pragma once

// Whole-model gradient check on random inputs.

#include <cstdint>

#include "trajsv/grad_check.hpp"
#include "trajsv/model.hpp"
#include "trajsv/objective.hpp"

namespace trajsv::diag {

struct ModelGradCheckOptions {
  model::ModelConfig model;
  std::size_t vocab_size = 5;
  std::size_t batch = 2;
  std::uint64_t seed = 1;
  double tol = 1e-4;
  double h = 1e-5;
  objective::LossConfig loss;
};

/// Random token/visual inputs for three aligned views; triple loss with
/// dropout off; every parameter entry compared against central differences.
tensor::GradCheckReport check_model_gradients(const ModelGradCheckOptions& options);

/// Random prepared videos matching `cfg` (tokens uniform over the vocabulary).
std::vector<model::PreparedVideo> random_videos(const model::ModelConfig& cfg, std::size_t vocab_size,
                                                std::size_t count, Rng& rng);

}  // namespace trajsv::diag
