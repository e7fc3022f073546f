#pragma once

// Straightforward reference implementations used as test oracles. They
// share no code with the library beyond the SegmentMatrix container.

#include <cmath>
#include <vector>

#include "trajsv/geom.hpp"
#include "trajsv/rng.hpp"

namespace oracle {

using trajsv::geom::SegmentMatrix;

inline double jaccard(const SegmentMatrix& a, const SegmentMatrix& b) {
  int inter = 0, uni = 0;
  for (int r = 0; r < a.rows(); ++r) {
    for (int c = 0; c < a.cols(); ++c) {
      const bool x = a.test(r, c), y = b.test(r, c);
      inter += x && y;
      uni += x || y;
    }
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / uni;
}

struct Vocab {
  double threshold = 0.3;
  std::vector<SegmentMatrix> reps;
};

// Linear scan in insertion order; PAD (all-zero) is token 0.
inline Vocab build(const std::vector<SegmentMatrix>& stream, int h, int w, double threshold,
                   std::vector<int>* assigned = nullptr) {
  Vocab v;
  v.threshold = threshold;
  v.reps.emplace_back(h, w);
  for (const auto& m : stream) {
    int id = -1;
    for (std::size_t i = 0; i < v.reps.size(); ++i) {
      if (oracle::jaccard(m, v.reps[i]) >= threshold) {
        id = static_cast<int>(i);
        break;
      }
    }
    if (id < 0) {
      id = static_cast<int>(v.reps.size());
      v.reps.push_back(m);
    }
    if (assigned) assigned->push_back(id);
  }
  return v;
}

inline int tokenize(const SegmentMatrix& m, const Vocab& v) {
  for (std::size_t i = 0; i < v.reps.size(); ++i) {
    if (oracle::jaccard(m, v.reps[i]) >= v.threshold) return static_cast<int>(i);
  }
  int best = 0;
  double best_j = -1.0;
  for (std::size_t i = 0; i < v.reps.size(); ++i) {
    const double j = oracle::jaccard(m, v.reps[i]);
    if (j > best_j) {
      best_j = j;
      best = static_cast<int>(i);
    }
  }
  return best;
}

// Sparse-ish random occupancy: a few short blobs, sometimes empty.
inline SegmentMatrix random_matrix(trajsv::Rng& rng, int h, int w) {
  SegmentMatrix m(h, w);
  const int blobs = static_cast<int>(trajsv::uniform_index(rng, 4));
  for (int b = 0; b < blobs; ++b) {
    int r = static_cast<int>(trajsv::uniform_index(rng, static_cast<std::size_t>(h)));
    int c = static_cast<int>(trajsv::uniform_index(rng, static_cast<std::size_t>(w)));
    const int len = 1 + static_cast<int>(trajsv::uniform_index(rng, 4));
    for (int k = 0; k < len; ++k) {
      m.set(r, c);
      if (trajsv::uniform01(rng) < 0.5) r = std::min(h - 1, r + 1);
      else c = std::min(w - 1, c + 1);
    }
  }
  return m;
}

}  // namespace oracle
