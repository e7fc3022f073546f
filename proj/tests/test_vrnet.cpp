#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "trajsv/config.hpp"
#include "trajsv/diagnostics.hpp"
#include "trajsv/error.hpp"
#include "trajsv/vrnet.hpp"

using namespace trajsv;
using namespace trajsv::vrnet;
using tensor::Tensor;

namespace {

Matrix rand_matrix(Index r, Index c, Rng& rng) {
  Matrix m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = 2.0 * uniform01(rng) - 1.0;
  return m;
}

double max_abs(const Matrix& a) { return a.cwiseAbs().maxCoeff(); }

Matrix permute_rows(const Matrix& x, const std::vector<int>& perm, Index offset = 0) {
  Matrix out = x;
  for (std::size_t i = 0; i < perm.size(); ++i)
    out.row(offset + static_cast<Index>(i)) = x.row(offset + perm[i]);
  return out;
}

VRNetConfig small_config(int n = 5) {
  VRNetConfig cfg;
  cfg.n = n;
  cfg.d5 = 6;
  cfg.enc_dims = {8, 8};
  cfg.d = 4;
  cfg.heads = 2;
  return cfg;
}

ParamStore make_params(const VRNetConfig& cfg, std::uint64_t seed = 1) {
  ParamStore store;
  Rng rng(seed);
  init_params(store, cfg, rng);
  return store;
}

}  // namespace

TEST_CASE("mab examples") {
  ParamStore store;
  Rng rng(2);
  init_mab(store, "m", 4, 6, 8, rng);
  const Matrix x = rand_matrix(3, 4, rng);
  const Matrix y = rand_matrix(1, 6, rng);

  SUBCASE("one query, one key") {
    const Matrix out = mab(Tensor::constant(x.topRows(1)), Tensor::constant(y), store, "m", 2, 1, 1).value();
    CHECK(out.rows() == 1);
    CHECK(out.cols() == 8);
    CHECK(out.allFinite());
  }
  SUBCASE("duplicated keys equal the single-key case") {
    const Matrix one = mab(Tensor::constant(x), Tensor::constant(y), store, "m", 2, 3, 1).value();
    const Matrix dup = mab(Tensor::constant(x), Tensor::constant(y.replicate(4, 1)), store, "m", 2, 3, 4).value();
    CHECK(max_abs(one - dup) < 1e-12);
  }
  SUBCASE("identical query rows give identical outputs") {
    const Matrix xs = x.topRows(1).replicate(3, 1);
    const Matrix out = mab(Tensor::constant(xs), Tensor::constant(rand_matrix(4, 6, rng)), store, "m", 2, 3, 4).value();
    CHECK(max_abs(out.row(1) - out.row(0)) < 1e-14);
    CHECK(max_abs(out.row(2) - out.row(0)) < 1e-14);
  }
  SUBCASE("residual projection exists only when widths differ") {
    CHECK(store.contains("m.res"));
    ParamStore same;
    init_mab(same, "s", 8, 8, 8, rng);
    CHECK_FALSE(same.contains("s.res"));
  }
}

TEST_CASE("msb examples") {
  ParamStore store;
  Rng rng(3);
  init_mab(store, "b", 6, 6, 8, rng);
  const Matrix x = rand_matrix(5, 6, rng);
  const Matrix self = msb(Tensor::constant(x), store, "b", 2, 5).value();
  CHECK(self == mab(Tensor::constant(x), Tensor::constant(x), store, "b", 2, 5, 5).value());
  CHECK(msb(Tensor::constant(x.topRows(1)), store, "b", 2, 1).value().rows() == 1);

  std::vector<int> perm{3, 0, 4, 1, 2};
  const Matrix permuted = msb(Tensor::constant(permute_rows(x, perm)), store, "b", 2, 5).value();
  CHECK(max_abs(permuted - permute_rows(self, perm)) < 1e-12);
}

TEST_CASE("encode and decode shapes") {
  SUBCASE("default widths") {
    VRNetConfig cfg;
    cfg.n = 16;
    const auto store = make_params(cfg);
    Rng rng(4);
    const Tensor c = Tensor::constant(rand_matrix(16, 640, rng));
    const Tensor e = encode_video(c, store, cfg);
    CHECK(e.rows() == 16);
    CHECK(e.cols() == 1280);
    CHECK(decode_video(e, store, cfg).shape() == std::vector<std::size_t>{1, 128});
  }
  SUBCASE("video width does not depend on n") {
    for (int n : {16, 4, 1}) {
      auto cfg = small_config(n);
      const auto store = make_params(cfg);
      Rng rng(5);
      const Tensor v = video_embedding(Tensor::constant(rand_matrix(2 * n, 6, rng)), store, cfg);
      CHECK(v.rows() == 2);
      CHECK(v.cols() == 4);
      CHECK(v.value().allFinite());
    }
  }
}

TEST_CASE("identical clips give identical encoder rows") {
  const auto cfg = small_config();
  const auto store = make_params(cfg);
  Rng rng(6);
  const Matrix row = rand_matrix(1, 6, rng);
  const Matrix e = encode_video(Tensor::constant(row.replicate(5, 1)), store, cfg).value();
  for (Index i = 1; i < 5; ++i) CHECK(max_abs(e.row(i) - e.row(0)) < 1e-13);
}

TEST_CASE("encoder is equivariant and the video vector invariant under clip permutations") {
  const auto cfg = small_config(6);
  const auto store = make_params(cfg, 7);
  Rng rng(8);
  const Matrix c = rand_matrix(12, 6, rng);  // two videos
  const Matrix e = encode_video(Tensor::constant(c), store, cfg).value();
  const Matrix v = video_embedding(Tensor::constant(c), store, cfg).value();
  std::vector<int> perm(6);
  std::iota(perm.begin(), perm.end(), 0);
  for (int trial = 0; trial < 20; ++trial) {
    std::shuffle(perm.begin(), perm.end(), rng);
    const Matrix pc = permute_rows(c, perm, 6);
    CHECK(max_abs(encode_video(Tensor::constant(pc), store, cfg).value() - permute_rows(e, perm, 6)) < 1e-9);
    CHECK(max_abs(video_embedding(Tensor::constant(pc), store, cfg).value() - v) < 1e-9);
  }
}

TEST_CASE("zero encoder output still yields a finite vector") {
  const auto cfg = small_config();
  auto store = make_params(cfg);
  for (auto& [name, p] : store.items()) {
    if (name.ends_with(".b") || name.ends_with(".b1") || name.ends_with(".b2")) p.mutable_value().setZero();
  }
  const Matrix v = decode_video(Tensor::constant(Matrix::Zero(5, 8)), store, cfg).value();
  CHECK(v.allFinite());
  CHECK(v.cols() == 4);
}

TEST_CASE("mean-pool ablation") {
  auto cfg = small_config();
  cfg.pooling = Pooling::mean;
  const auto store = make_params(cfg);
  CHECK(store.contains("vrnet.meanpool.w"));
  Rng rng(9);
  const Matrix c = rand_matrix(5, 6, rng);
  const Matrix v = video_embedding(Tensor::constant(c), store, cfg).value();
  const Matrix expect = c.colwise().mean() * store.at("vrnet.meanpool.w").value() + store.at("vrnet.meanpool.b").value();
  CHECK(max_abs(v - expect) < 1e-14);
}

TEST_CASE("config validation") {
  auto cfg = small_config();
  cfg.heads = 3;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = small_config();
  cfg.n = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("end-to-end gradients match finite differences") {
  diag::ModelGradCheckOptions options;
  options.model = config::tiny_model();
  const auto report = diag::check_model_gradients(options);
  CHECK(report.passed);
  CHECK(report.max_rel_error < 1e-4);
  CHECK(report.per_param.size() > 20);
}
