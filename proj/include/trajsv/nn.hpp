#pragma once

// Small building blocks shared by the clip and video encoders.

#include <string>

#include "trajsv/param_store.hpp"
#include "trajsv/rng.hpp"

namespace trajsv::nn {

using tensor::Index;
using tensor::Matrix;
using tensor::ParamStore;
using tensor::Tensor;

struct ForwardContext {
  bool training = false;
  Rng* rng = nullptr;  // required when training with dropout
};

/// Glorot-uniform weight matrix.
Matrix glorot(Index fan_in, Index fan_out, Rng& rng);
Matrix normal(Index rows, Index cols, double stddev, Rng& rng);

/// Registers `prefix.w1/b1/w2/b2` for a one-hidden-layer ReLU network.
void init_ffn(ParamStore& store, const std::string& prefix, Index in, Index hidden, Index out, Rng& rng);
/// relu(x W1 + b1) W2 + b2, applied row-wise.
Tensor ffn(const Tensor& x, const ParamStore& store, const std::string& prefix);

/// Registers `prefix.g` (ones) and `prefix.b` (zeros).
void init_layer_norm(ParamStore& store, const std::string& prefix, Index dim);
Tensor layer_norm(const Tensor& x, const ParamStore& store, const std::string& prefix);

}  // namespace trajsv::nn
