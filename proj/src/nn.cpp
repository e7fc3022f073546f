#include "trajsv/nn.hpp"

#include <cmath>

namespace trajsv::nn {

Matrix glorot(Index fan_in, Index fan_out, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> u(-a, a);
  Matrix m(fan_in, fan_out);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

Matrix normal(Index rows, Index cols, double stddev, Rng& rng) {
  std::normal_distribution<double> n(0.0, stddev);
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

void init_ffn(ParamStore& store, const std::string& prefix, Index in, Index hidden, Index out, Rng& rng) {
  store.add(prefix + ".w1", glorot(in, hidden, rng));
  store.add(prefix + ".b1", Matrix::Zero(1, hidden));
  store.add(prefix + ".w2", glorot(hidden, out, rng));
  store.add(prefix + ".b2", Matrix::Zero(1, out));
}

Tensor ffn(const Tensor& x, const ParamStore& store, const std::string& prefix) {
  using namespace tensor;
  const Tensor hidden = relu(add_row(matmul(x, store.at(prefix + ".w1")), store.at(prefix + ".b1")));
  return add_row(matmul(hidden, store.at(prefix + ".w2")), store.at(prefix + ".b2"));
}

void init_layer_norm(ParamStore& store, const std::string& prefix, Index dim) {
  store.add(prefix + ".g", Matrix::Ones(1, dim));
  store.add(prefix + ".b", Matrix::Zero(1, dim));
}

Tensor layer_norm(const Tensor& x, const ParamStore& store, const std::string& prefix) {
  return tensor::layer_norm(x, store.at(prefix + ".g"), store.at(prefix + ".b"));
}

}  // namespace trajsv::nn
