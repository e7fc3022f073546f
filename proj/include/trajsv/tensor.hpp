#pragma once

// Dense 2-D tensors with define-by-run reverse-mode differentiation.
//
// Every op builds a node holding its forward value and a closure that
// scatters the node's gradient into its inputs. A graph is built per forward
// pass and freed when the last Tensor handle to it goes away; parameters are
// long-lived leaves whose gradients accumulate until cleared.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "trajsv/rng.hpp"

namespace trajsv::tensor {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;

struct Node {
  Matrix value;
  Matrix grad;
  bool has_grad = false;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(const Matrix&)> backward;

  void accumulate(const Matrix& g);
};

class Tensor {
 public:
  Tensor() = default;

  /// Leaf that never receives gradients.
  static Tensor constant(Matrix value);
  /// Trainable leaf.
  static Tensor parameter(Matrix value);

  bool defined() const { return node_ != nullptr; }
  Index rows() const { return node_->value.rows(); }
  Index cols() const { return node_->value.cols(); }
  std::vector<std::size_t> shape() const {
    return {static_cast<std::size_t>(rows()), static_cast<std::size_t>(cols())};
  }

  const Matrix& value() const { return node_->value; }
  Matrix& mutable_value() { return node_->value; }
  double item() const;

  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return node_->has_grad; }
  /// Gradient buffer; zero-sized when nothing has been accumulated.
  const Matrix& grad() const { return node_->grad; }
  void clear_grad();

  /// Same value, cut from the graph.
  Tensor detach() const;

  const std::shared_ptr<Node>& node() const { return node_; }

  /// Internal: wraps a computed value with its backward rule.
  static Tensor from_op(Matrix value, std::vector<Tensor> inputs,
                        std::function<void(const Matrix&)> backward);

 private:
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}
  std::shared_ptr<Node> node_;
};

/// While alive, ops on this thread record no backward graph (inference mode).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

/// Reverse pass from a 1x1 loss. Throws InvalidArgument for non-scalar input.
void backward(const Tensor& loss);

// --- linear algebra --------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
/// a * b^T without materializing the transpose.
Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& x);

// --- elementwise -----------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
/// x (p x q) plus a 1 x q row broadcast over every row.
Tensor add_row(const Tensor& x, const Tensor& row);
Tensor scale(const Tensor& x, double s);
Tensor relu(const Tensor& x);
/// Sets the diagonal of a square matrix to `value`; no gradient flows through those entries.
Tensor fill_diagonal(const Tensor& x, double value);

// --- structure -------------------------------------------------------------

Tensor concat_cols(std::span<const Tensor> parts);
Tensor concat_rows(std::span<const Tensor> parts);
Tensor slice_rows(const Tensor& x, Index begin, Index count);
Tensor slice_cols(const Tensor& x, Index begin, Index count);
/// Row i of the output is row ids[i] of `table`.
Tensor gather_rows(const Tensor& table, std::span<const int> ids);
/// Stacks `times` copies of x vertically.
Tensor tile_rows(const Tensor& x, Index times);
/// Column means over consecutive groups of `block` rows: (k*block x q) -> (k x q).
Tensor block_mean_rows(const Tensor& x, Index block);
/// Square matrix diagonal as a column (p x 1).
Tensor diagonal(const Tensor& x);

// --- reductions / normalization -------------------------------------------

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
/// Row-wise softmax with max subtraction.
Tensor softmax_rows(const Tensor& x);
/// Row-wise log(sum(exp(.))) as a p x 1 column; rows that are entirely -inf yield -inf.
Tensor logsumexp_rows(const Tensor& x);
/// Per row: (x - mean) / sqrt(var + eps) * gain + bias, gain/bias are 1 x q.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);
/// Rows scaled to unit Euclidean norm.
Tensor l2_normalize_rows(const Tensor& x);

/// Inverted dropout; identity when `rate` is 0.
Tensor dropout(const Tensor& x, double rate, Rng& rng);

struct AttentionShape {
  Index heads = 1;
  Index query_block = 0;  // rows per set on the query side
  Index key_block = 0;    // rows per set on the key/value side
  double scale = 1.0;     // logits multiplier, usually 1/sqrt(head_dim)
};

/// Scaled dot-product attention over independent sets. q has k*query_block
/// rows, kv have k*key_block rows; set b attends only within itself. Columns
/// are split into `heads` equal slices and the per-head outputs are
/// concatenated. `key_valid`, when non-empty, masks keys (one flag per key
/// row); a set whose keys are all masked attends to every key.
Tensor block_attention(const Tensor& q, const Tensor& k, const Tensor& v, const AttentionShape& shape,
                       std::span<const char> key_valid = {});

}  // namespace trajsv::tensor
