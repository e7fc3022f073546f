#include "trajsv/objective.hpp"

#include <limits>

#include "trajsv/error.hpp"

namespace trajsv::objective {

using namespace tensor;

void LossConfig::validate() const {
  if (!(tau > 0.0)) throw ConfigError("loss tau must be positive");
  if (!(alpha >= 0.0 && beta >= 0.0 && alpha + beta <= 1.0 + 1e-12)) {
    throw ConfigError("loss weights need alpha, beta >= 0 and alpha + beta <= 1");
  }
}

Tensor info_nce_directional(const Tensor& a, const Tensor& b, const LossConfig& cfg) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw InvalidArgument("info_nce: embedding matrices must have equal shapes");
  }
  if (a.rows() < 2) throw InvalidArgument("info_nce: batch must contain at least two rows");
  const bool cosine = cfg.similarity == Similarity::cosine;
  const Tensor an = cosine ? l2_normalize_rows(a) : a;
  const Tensor bn = cosine ? l2_normalize_rows(b) : b;
  const Tensor logits = scale(matmul_nt(an, bn), 1.0 / cfg.tau);
  const Tensor denom_logits = cfg.denominator == Denominator::literal
                                  ? fill_diagonal(logits, -std::numeric_limits<double>::infinity())
                                  : logits;
  const Tensor per_row = sub(logsumexp_rows(denom_logits), diagonal(logits));
  return cfg.reduction == Reduction::mean ? mean(per_row) : sum(per_row);
}

Tensor pair_loss(const Tensor& a, const Tensor& b, const LossConfig& cfg) {
  return add(info_nce_directional(a, b, cfg), info_nce_directional(b, a, cfg));
}

Tensor triple_loss(const EmbeddingBatch& batch, const LossConfig& cfg) {
  cfg.validate();
  switch (cfg.drop_view) {
    case DropView::anchor:
      return pair_loss(batch.intra, batch.inter, cfg);
    case DropView::intra:
      return pair_loss(batch.anchor, batch.inter, cfg);
    case DropView::inter:
      return pair_loss(batch.anchor, batch.intra, cfg);
    case DropView::none:
      break;
  }
  const double rest = 1.0 - cfg.alpha - cfg.beta;
  Tensor loss = scale(pair_loss(batch.anchor, batch.intra, cfg), cfg.alpha);
  loss = add(loss, scale(pair_loss(batch.anchor, batch.inter, cfg), cfg.beta));
  return add(loss, scale(pair_loss(batch.intra, batch.inter, cfg), rest));
}

}  // namespace trajsv::objective
