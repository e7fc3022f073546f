#pragma once

// Triple contrastive objective over an anchor batch and its two noised
// variants, with in-batch negatives.

#include "trajsv/tensor.hpp"

namespace trajsv::objective {

using tensor::Tensor;

enum class Similarity { cosine, dot };
/// standard: positive included in the denominator (InfoNCE cross-entropy);
/// literal: denominator over negatives j != i only.
enum class Denominator { standard, literal };
enum class Reduction { mean, sum };
/// Which view is left out of the objective (loss-term ablation).
enum class DropView { none, anchor, intra, inter };

struct LossConfig {
  double tau = 0.1;
  double alpha = 0.5;
  double beta = 0.3;
  Similarity similarity = Similarity::cosine;
  Denominator denominator = Denominator::standard;
  Reduction reduction = Reduction::mean;
  DropView drop_view = DropView::none;

  void validate() const;
};

/// Aligned rows: anchor[i], intra[i] and inter[i] derive from the same video.
struct EmbeddingBatch {
  Tensor anchor;
  Tensor intra;
  Tensor inter;
};

/// Anchored at A: row i's positive is B_i, negatives are B_j (j != i).
/// Throws InvalidArgument when the batch has fewer than two rows.
Tensor info_nce_directional(const Tensor& a, const Tensor& b, const LossConfig& cfg);

/// info_nce_directional(A, B) + info_nce_directional(B, A).
Tensor pair_loss(const Tensor& a, const Tensor& b, const LossConfig& cfg);

/// alpha * L(V1, V2) + beta * L(V1, V3) + (1 - alpha - beta) * L(V2, V3).
Tensor triple_loss(const EmbeddingBatch& batch, const LossConfig& cfg);

}  // namespace trajsv::objective
