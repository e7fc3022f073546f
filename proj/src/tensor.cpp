#include "trajsv/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <unordered_set>

#include "trajsv/error.hpp"

namespace trajsv::tensor {

namespace {

std::string shape_str(const Matrix& m) {
  return "[" + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + "]";
}

void require(bool ok, const char* op, const std::string& detail) {
  if (!ok) throw InvalidArgument(std::string(op) + ": " + detail);
}

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

thread_local bool g_grad_enabled = true;

}  // namespace

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

void Node::accumulate(const Matrix& g) {
  if (!requires_grad) return;
  if (!has_grad) {
    grad = g;
    has_grad = true;
  } else {
    grad += g;
  }
}

Tensor Tensor::constant(Matrix value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  return Tensor(std::move(node));
}

Tensor Tensor::parameter(Matrix value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = true;
  return Tensor(std::move(node));
}

double Tensor::item() const {
  if (rows() != 1 || cols() != 1) throw InvalidArgument("item: tensor is not 1x1");
  return node_->value(0, 0);
}

void Tensor::clear_grad() {
  node_->grad.resize(0, 0);
  node_->has_grad = false;
}

Tensor Tensor::detach() const { return constant(node_->value); }

Tensor Tensor::from_op(Matrix value, std::vector<Tensor> inputs,
                       std::function<void(const Matrix&)> backward) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  if (g_grad_enabled) {
    for (const auto& in : inputs) {
      if (in.node_->requires_grad) node->requires_grad = true;
    }
  }
  if (node->requires_grad) {
    for (auto& in : inputs) node->parents.push_back(in.node_);
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.rows() != 1 || loss.cols() != 1) {
    throw InvalidArgument("backward: loss must be a 1x1 tensor");
  }
  if (!loss.requires_grad()) return;

  // Iterative post-order DFS gives a topological order (inputs before outputs).
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{loss.node().get(), 0}};
  visited.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  loss.node()->accumulate(Matrix::Ones(1, 1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (!node->backward || !node->has_grad) continue;
    node->backward(node->grad);
    // Interior gradients are not needed once propagated.
    node->grad.resize(0, 0);
    node->has_grad = false;
  }
}

// --- linear algebra --------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.cols() == b.rows(), "matmul", shape_str(a.value()) + " * " + shape_str(b.value()));
  Matrix out(a.rows(), b.cols());
  out.noalias() = a.value() * b.value();
  Node* pa = a.node().get();
  Node* pb = b.node().get();
  return Tensor::from_op(std::move(out), {a, b}, [pa, pb](const Matrix& g) {
    if (pa->requires_grad) {
      Matrix ga(pa->value.rows(), pa->value.cols());
      ga.noalias() = g * pb->value.transpose();
      pa->accumulate(ga);
    }
    if (pb->requires_grad) {
      Matrix gb(pb->value.rows(), pb->value.cols());
      gb.noalias() = pa->value.transpose() * g;
      pb->accumulate(gb);
    }
  });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require(a.cols() == b.cols(), "matmul_nt", shape_str(a.value()) + " * " + shape_str(b.value()) + "^T");
  Matrix out(a.rows(), b.rows());
  out.noalias() = a.value() * b.value().transpose();
  Node* pa = a.node().get();
  Node* pb = b.node().get();
  return Tensor::from_op(std::move(out), {a, b}, [pa, pb](const Matrix& g) {
    if (pa->requires_grad) {
      Matrix ga(pa->value.rows(), pa->value.cols());
      ga.noalias() = g * pb->value;
      pa->accumulate(ga);
    }
    if (pb->requires_grad) {
      Matrix gb(pb->value.rows(), pb->value.cols());
      gb.noalias() = g.transpose() * pa->value;
      pb->accumulate(gb);
    }
  });
}

Tensor transpose(const Tensor& x) {
  Node* px = x.node().get();
  return Tensor::from_op(x.value().transpose(), {x},
                         [px](const Matrix& g) { px->accumulate(g.transpose()); });
}

// --- elementwise -----------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "add",
          shape_str(a.value()) + " + " + shape_str(b.value()));
  Node* pa = a.node().get();
  Node* pb = b.node().get();
  return Tensor::from_op(a.value() + b.value(), {a, b}, [pa, pb](const Matrix& g) {
    pa->accumulate(g);
    pb->accumulate(g);
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "sub",
          shape_str(a.value()) + " - " + shape_str(b.value()));
  Node* pa = a.node().get();
  Node* pb = b.node().get();
  return Tensor::from_op(a.value() - b.value(), {a, b}, [pa, pb](const Matrix& g) {
    pa->accumulate(g);
    if (pb->requires_grad) pb->accumulate(-g);
  });
}

Tensor add_row(const Tensor& x, const Tensor& row) {
  require(row.rows() == 1 && row.cols() == x.cols(), "add_row",
          shape_str(x.value()) + " + " + shape_str(row.value()));
  Matrix out = x.value().rowwise() + row.value().row(0);
  Node* px = x.node().get();
  Node* pr = row.node().get();
  return Tensor::from_op(std::move(out), {x, row}, [px, pr](const Matrix& g) {
    px->accumulate(g);
    if (pr->requires_grad) pr->accumulate(g.colwise().sum());
  });
}

Tensor scale(const Tensor& x, double s) {
  Node* px = x.node().get();
  return Tensor::from_op(x.value() * s, {x}, [px, s](const Matrix& g) { px->accumulate(g * s); });
}

Tensor relu(const Tensor& x) {
  Node* px = x.node().get();
  return Tensor::from_op(x.value().cwiseMax(0.0), {x}, [px](const Matrix& g) {
    px->accumulate((px->value.array() > 0.0).select(g, 0.0));
  });
}

Tensor fill_diagonal(const Tensor& x, double value) {
  require(x.rows() == x.cols(), "fill_diagonal", "matrix must be square, got " + shape_str(x.value()));
  Matrix out = x.value();
  out.diagonal().setConstant(value);
  Node* px = x.node().get();
  return Tensor::from_op(std::move(out), {x}, [px](const Matrix& g) {
    Matrix gx = g;
    gx.diagonal().setZero();
    px->accumulate(gx);
  });
}

// --- structure -------------------------------------------------------------

Tensor concat_cols(std::span<const Tensor> parts) {
  require(!parts.empty(), "concat_cols", "no inputs");
  const Index rows = parts.front().rows();
  Index cols = 0;
  for (const auto& p : parts) {
    require(p.rows() == rows, "concat_cols", "row counts differ");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  std::vector<Node*> nodes;
  Index off = 0;
  for (const auto& p : parts) {
    out.middleCols(off, p.cols()) = p.value();
    off += p.cols();
    nodes.push_back(p.node().get());
  }
  return Tensor::from_op(std::move(out), {parts.begin(), parts.end()}, [nodes](const Matrix& g) {
    Index o = 0;
    for (Node* n : nodes) {
      if (n->requires_grad) n->accumulate(g.middleCols(o, n->value.cols()));
      o += n->value.cols();
    }
  });
}

Tensor concat_rows(std::span<const Tensor> parts) {
  require(!parts.empty(), "concat_rows", "no inputs");
  const Index cols = parts.front().cols();
  Index rows = 0;
  for (const auto& p : parts) {
    require(p.cols() == cols, "concat_rows", "column counts differ");
    rows += p.rows();
  }
  Matrix out(rows, cols);
  std::vector<Node*> nodes;
  Index off = 0;
  for (const auto& p : parts) {
    out.middleRows(off, p.rows()) = p.value();
    off += p.rows();
    nodes.push_back(p.node().get());
  }
  return Tensor::from_op(std::move(out), {parts.begin(), parts.end()}, [nodes](const Matrix& g) {
    Index o = 0;
    for (Node* n : nodes) {
      if (n->requires_grad) n->accumulate(g.middleRows(o, n->value.rows()));
      o += n->value.rows();
    }
  });
}

Tensor slice_rows(const Tensor& x, Index begin, Index count) {
  require(begin >= 0 && count >= 0 && begin + count <= x.rows(), "slice_rows", "range out of bounds");
  Node* px = x.node().get();
  return Tensor::from_op(x.value().middleRows(begin, count), {x}, [px, begin, count](const Matrix& g) {
    Matrix gx = Matrix::Zero(px->value.rows(), px->value.cols());
    gx.middleRows(begin, count) = g;
    px->accumulate(gx);
  });
}

Tensor slice_cols(const Tensor& x, Index begin, Index count) {
  require(begin >= 0 && count >= 0 && begin + count <= x.cols(), "slice_cols", "range out of bounds");
  Node* px = x.node().get();
  return Tensor::from_op(x.value().middleCols(begin, count), {x}, [px, begin, count](const Matrix& g) {
    Matrix gx = Matrix::Zero(px->value.rows(), px->value.cols());
    gx.middleCols(begin, count) = g;
    px->accumulate(gx);
  });
}

Tensor gather_rows(const Tensor& table, std::span<const int> ids) {
  Matrix out(static_cast<Index>(ids.size()), table.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    require(ids[i] >= 0 && ids[i] < table.rows(), "gather_rows",
            "id " + std::to_string(ids[i]) + " outside table of " + std::to_string(table.rows()) + " rows");
    out.row(static_cast<Index>(i)) = table.value().row(ids[i]);
  }
  Node* pt = table.node().get();
  std::vector<int> idx(ids.begin(), ids.end());
  return Tensor::from_op(std::move(out), {table}, [pt, idx = std::move(idx)](const Matrix& g) {
    Matrix gt = Matrix::Zero(pt->value.rows(), pt->value.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) gt.row(idx[i]) += g.row(static_cast<Index>(i));
    pt->accumulate(gt);
  });
}

Tensor tile_rows(const Tensor& x, Index times) {
  require(times >= 1, "tile_rows", "times must be >= 1");
  const Index r = x.rows();
  Matrix out(r * times, x.cols());
  for (Index t = 0; t < times; ++t) out.middleRows(t * r, r) = x.value();
  Node* px = x.node().get();
  return Tensor::from_op(std::move(out), {x}, [px, r, times](const Matrix& g) {
    Matrix gx = g.middleRows(0, r);
    for (Index t = 1; t < times; ++t) gx += g.middleRows(t * r, r);
    px->accumulate(gx);
  });
}

Tensor block_mean_rows(const Tensor& x, Index block) {
  require(block >= 1 && x.rows() % block == 0, "block_mean_rows",
          "rows " + std::to_string(x.rows()) + " not divisible by block " + std::to_string(block));
  const Index groups = x.rows() / block;
  Matrix out(groups, x.cols());
  for (Index b = 0; b < groups; ++b) out.row(b) = x.value().middleRows(b * block, block).colwise().mean();
  Node* px = x.node().get();
  return Tensor::from_op(std::move(out), {x}, [px, block, groups](const Matrix& g) {
    Matrix gx(px->value.rows(), px->value.cols());
    const double inv = 1.0 / static_cast<double>(block);
    for (Index b = 0; b < groups; ++b) {
      for (Index i = 0; i < block; ++i) gx.row(b * block + i) = g.row(b) * inv;
    }
    px->accumulate(gx);
  });
}

Tensor diagonal(const Tensor& x) {
  require(x.rows() == x.cols(), "diagonal", "matrix must be square, got " + shape_str(x.value()));
  Matrix out = x.value().diagonal();
  Node* px = x.node().get();
  return Tensor::from_op(std::move(out), {x}, [px](const Matrix& g) {
    Matrix gx = Matrix::Zero(px->value.rows(), px->value.cols());
    gx.diagonal() = g.col(0);
    px->accumulate(gx);
  });
}

// --- reductions / normalization -------------------------------------------

Tensor sum(const Tensor& x) {
  Matrix out(1, 1);
  out(0, 0) = x.value().sum();
  Node* px = x.node().get();
  return Tensor::from_op(std::move(out), {x}, [px](const Matrix& g) {
    px->accumulate(Matrix::Constant(px->value.rows(), px->value.cols(), g(0, 0)));
  });
}

Tensor mean(const Tensor& x) {
  require(x.value().size() > 0, "mean", "empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.value().size()));
}

namespace {

void softmax_inplace(Matrix& m) {
  for (Index i = 0; i < m.rows(); ++i) {
    auto row = m.row(i);
    const double mx = row.maxCoeff();
    row = (row.array() - mx).exp();
    row /= row.sum();
  }
}

}  // namespace

Tensor softmax_rows(const Tensor& x) {
  Matrix y = x.value();
  softmax_inplace(y);
  Node* px = x.node().get();
  Matrix y_saved = y;
  return Tensor::from_op(std::move(y), {x}, [px, y = std::move(y_saved)](const Matrix& g) {
    Matrix gx = y.cwiseProduct(g);
    const Eigen::VectorXd dots = gx.rowwise().sum();
    gx -= (y.array().colwise() * dots.array()).matrix();
    px->accumulate(gx);
  });
}

Tensor logsumexp_rows(const Tensor& x) {
  const Index p = x.rows();
  Matrix out(p, 1);
  Matrix probs = Matrix::Zero(p, x.cols());
  for (Index i = 0; i < p; ++i) {
    const auto row = x.value().row(i);
    const double mx = row.maxCoeff();
    if (mx == kNegInf) {
      out(i, 0) = kNegInf;
      continue;
    }
    probs.row(i) = (row.array() - mx).exp();
    const double s = probs.row(i).sum();
    out(i, 0) = mx + std::log(s);
    probs.row(i) /= s;
  }
  Node* px = x.node().get();
  return Tensor::from_op(std::move(out), {x}, [px, probs = std::move(probs)](const Matrix& g) {
    Matrix gx = probs.array().colwise() * g.col(0).array();
    px->accumulate(gx);
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  const Index q = x.cols();
  require(gain.rows() == 1 && gain.cols() == q && bias.rows() == 1 && bias.cols() == q, "layer_norm",
          "gain/bias must be 1x" + std::to_string(q));
  require(eps > 0.0, "layer_norm", "eps must be positive");
  const Index p = x.rows();
  Matrix xhat(p, q);
  Eigen::VectorXd rstd(p);
  for (Index i = 0; i < p; ++i) {
    const auto row = x.value().row(i);
    const double mu = row.mean();
    const double var = (row.array() - mu).square().mean();
    rstd(i) = 1.0 / std::sqrt(var + eps);
    xhat.row(i) = (row.array() - mu) * rstd(i);
  }
  Matrix out = (xhat.array().rowwise() * gain.value().row(0).array()).rowwise() +
               bias.value().row(0).array();
  Node* px = x.node().get();
  Node* pg = gain.node().get();
  Node* pb = bias.node().get();
  return Tensor::from_op(
      std::move(out), {x, gain, bias},
      [px, pg, pb, xhat = std::move(xhat), rstd = std::move(rstd)](const Matrix& g) {
        if (pg->requires_grad) pg->accumulate(g.cwiseProduct(xhat).colwise().sum());
        if (pb->requires_grad) pb->accumulate(g.colwise().sum());
        if (px->requires_grad) {
          const Matrix dxhat = g.array().rowwise() * pg->value.row(0).array();
          Matrix gx(dxhat.rows(), dxhat.cols());
          for (Index i = 0; i < dxhat.rows(); ++i) {
            const double m1 = dxhat.row(i).mean();
            const double m2 = dxhat.row(i).cwiseProduct(xhat.row(i)).mean();
            gx.row(i) = rstd(i) * (dxhat.row(i).array() - m1 - xhat.row(i).array() * m2);
          }
          px->accumulate(gx);
        }
      });
}

Tensor l2_normalize_rows(const Tensor& x) {
  const Index p = x.rows();
  Eigen::VectorXd norms(p);
  Matrix y(p, x.cols());
  for (Index i = 0; i < p; ++i) {
    norms(i) = std::sqrt(x.value().row(i).squaredNorm() + 1e-24);
    y.row(i) = x.value().row(i) / norms(i);
  }
  Node* px = x.node().get();
  Matrix y_saved = y;
  return Tensor::from_op(std::move(y), {x},
                         [px, y = std::move(y_saved), norms = std::move(norms)](const Matrix& g) {
                           Matrix gx(g.rows(), g.cols());
                           for (Index i = 0; i < g.rows(); ++i) {
                             const double d = y.row(i).dot(g.row(i));
                             gx.row(i) = (g.row(i) - y.row(i) * d) / norms(i);
                           }
                           px->accumulate(gx);
                         });
}

Tensor dropout(const Tensor& x, double rate, Rng& rng) {
  require(rate >= 0.0 && rate < 1.0, "dropout", "rate must lie in [0, 1)");
  if (rate == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - rate);
  Matrix mask(x.rows(), x.cols());
  for (Index i = 0; i < mask.size(); ++i) mask.data()[i] = uniform01(rng) >= rate ? keep_scale : 0.0;
  Node* px = x.node().get();
  Matrix out = x.value().cwiseProduct(mask);
  return Tensor::from_op(std::move(out), {x}, [px, mask = std::move(mask)](const Matrix& g) {
    px->accumulate(g.cwiseProduct(mask));
  });
}

// --- attention -------------------------------------------------------------

Tensor block_attention(const Tensor& q, const Tensor& k, const Tensor& v, const AttentionShape& s,
                       std::span<const char> key_valid) {
  const Index qb = s.query_block;
  const Index kb = s.key_block;
  const Index h = s.heads;
  require(h >= 1 && qb >= 1 && kb >= 1, "block_attention", "heads and block sizes must be positive");
  require(q.cols() == k.cols(), "block_attention", "query/key widths differ");
  require(k.rows() == v.rows(), "block_attention", "key/value row counts differ");
  require(q.rows() % qb == 0 && k.rows() % kb == 0 && q.rows() / qb == k.rows() / kb, "block_attention",
          "query and key rows do not split into the same number of sets");
  require(q.cols() % h == 0 && v.cols() % h == 0, "block_attention", "head count must divide widths");
  require(key_valid.empty() || static_cast<Index>(key_valid.size()) == k.rows(), "block_attention",
          "key mask length must equal key rows");

  const Index sets = q.rows() / qb;
  const Index dh = q.cols() / h;
  const Index dvh = v.cols() / h;
  const Matrix& Q = q.value();
  const Matrix& K = k.value();
  const Matrix& V = v.value();

  Matrix out(q.rows(), v.cols());
  Matrix probs(sets * h * qb, kb);
  Matrix logits(qb, kb);
  for (Index b = 0; b < sets; ++b) {
    bool any_valid = key_valid.empty();
    for (Index j = 0; !any_valid && j < kb; ++j) any_valid = key_valid[static_cast<std::size_t>(b * kb + j)];
    for (Index head = 0; head < h; ++head) {
      logits.noalias() = Q.block(b * qb, head * dh, qb, dh) * K.block(b * kb, head * dh, kb, dh).transpose();
      logits *= s.scale;
      if (!key_valid.empty() && any_valid) {
        for (Index j = 0; j < kb; ++j) {
          if (!key_valid[static_cast<std::size_t>(b * kb + j)]) logits.col(j).setConstant(kNegInf);
        }
      }
      softmax_inplace(logits);
      probs.middleRows((b * h + head) * qb, qb) = logits;
      out.block(b * qb, head * dvh, qb, dvh).noalias() = logits * V.block(b * kb, head * dvh, kb, dvh);
    }
  }

  Node* pq = q.node().get();
  Node* pk = k.node().get();
  Node* pv = v.node().get();
  const double scale_factor = s.scale;
  return Tensor::from_op(
      std::move(out), {q, k, v},
      [pq, pk, pv, probs = std::move(probs), sets, h, qb, kb, dh, dvh, scale_factor](const Matrix& g) {
        const Matrix& Qv = pq->value;
        const Matrix& Kv = pk->value;
        const Matrix& Vv = pv->value;
        Matrix gq = Matrix::Zero(Qv.rows(), Qv.cols());
        Matrix gk = Matrix::Zero(Kv.rows(), Kv.cols());
        Matrix gv = Matrix::Zero(Vv.rows(), Vv.cols());
        Matrix dp(qb, kb);
        for (Index b = 0; b < sets; ++b) {
          for (Index head = 0; head < h; ++head) {
            const auto P = probs.middleRows((b * h + head) * qb, qb);
            const auto go = g.block(b * qb, head * dvh, qb, dvh);
            gv.block(b * kb, head * dvh, kb, dvh).noalias() += P.transpose() * go;
            dp.noalias() = go * Vv.block(b * kb, head * dvh, kb, dvh).transpose();
            // softmax backward: dS = P .* (dP - rowsum(dP .* P))
            const Eigen::VectorXd dots = dp.cwiseProduct(P).rowwise().sum();
            Matrix ds = P.array() * (dp.array().colwise() - dots.array());
            ds *= scale_factor;
            gq.block(b * qb, head * dh, qb, dh).noalias() += ds * Kv.block(b * kb, head * dh, kb, dh);
            gk.block(b * kb, head * dh, kb, dh).noalias() += ds.transpose() * Qv.block(b * qb, head * dh, qb, dh);
          }
        }
        pq->accumulate(gq);
        pk->accumulate(gk);
        pv->accumulate(gv);
      });
}

}  // namespace trajsv::tensor
