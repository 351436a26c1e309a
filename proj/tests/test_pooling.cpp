#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "doctest.h"
#include "litevl/gradcheck.hpp"
#include "litevl/model.hpp"
#include "litevl/pooling.hpp"
#include "toy_setup.hpp"

using litevl::make_const;
using litevl::make_param;
using litevl::PooledBundle;
using litevl::PoolingMode;
using litevl::Rng;
using litevl::Tensor;
using litevl::Var;
namespace ops = litevl::ops;

namespace {

// V_L stand-in with an arbitrary CLS row and given patch rows, D=1.
litevl::Var<double> tiny_vl(const std::vector<double>& patch_vals) {
  Tensor<double> m({1 + patch_vals.size(), 1});
  m[0] = -9.0;
  for (std::size_t i = 0; i < patch_vals.size(); ++i) m[1 + i] = patch_vals[i];
  return make_const(m);
}

// Bundle whose pooled rows are unit coordinate vectors, so cosine
// similarities against a coordinate-vector text embedding are exact.
PooledBundle<double> orthonormal_bundle(std::size_t t_count, std::size_t s_count,
                                        std::size_t dim) {
  PooledBundle<double> b;
  Tensor<double> ft({t_count, dim});
  for (std::size_t i = 0; i < t_count; ++i) ft(i, i) = 1.0;
  Tensor<double> fs({s_count, dim});
  for (std::size_t i = 0; i < s_count; ++i) fs(i, t_count + i) = 1.0;
  b.v_ft = make_const(ft);
  b.v_fs = make_const(fs);
  return b;
}

litevl::Var<double> basis_text(std::size_t dim, std::size_t hot, double value = 1.0) {
  Tensor<double> t({1, dim});
  t[hot] = value;
  return make_const(t);
}

}  // namespace

TEST_CASE("mean pools match the hand computation") {
  // T=2, S=2, D=1; patch rows 1,3 (frame 0) and 5,7 (frame 1)
  auto [v_ft, v_fs] = litevl::mean_pools(tiny_vl({1, 3, 5, 7}), 2, 2);
  CHECK(v_ft.value()(0, 0) == doctest::Approx(2.0));
  CHECK(v_ft.value()(1, 0) == doctest::Approx(6.0));
  CHECK(v_fs.value()(0, 0) == doctest::Approx(3.0));
  CHECK(v_fs.value()(1, 0) == doctest::Approx(5.0));
}

TEST_CASE("pooling a constant field is constant and ignores CLS") {
  auto [v_ft, v_fs] = litevl::mean_pools(tiny_vl({4, 4, 4, 4, 4, 4}), 3, 2);
  for (std::size_t i = 0; i < v_ft.value().numel(); ++i) CHECK(v_ft.value()[i] == 4.0);
  for (std::size_t i = 0; i < v_fs.value().numel(); ++i) CHECK(v_fs.value()[i] == 4.0);
}

TEST_CASE("mean pooling is linear") {
  std::vector<double> base{1, -2, 0.5, 3, 7, -1};
  std::vector<double> doubled;
  for (double v : base) doubled.push_back(2.0 * v);
  auto [a_t, a_s] = litevl::mean_pools(tiny_vl(base), 2, 3);
  auto [b_t, b_s] = litevl::mean_pools(tiny_vl(doubled), 2, 3);
  for (std::size_t i = 0; i < a_t.value().numel(); ++i) {
    CHECK(b_t.value()[i] == doctest::Approx(2.0 * a_t.value()[i]).epsilon(1e-12));
  }
  for (std::size_t i = 0; i < a_s.value().numel(); ++i) {
    CHECK(b_s.value()[i] == doctest::Approx(2.0 * a_s.value()[i]).epsilon(1e-12));
  }
}

TEST_CASE("wrong row count is rejected") {
  CHECK_THROWS_AS(litevl::mean_pools(tiny_vl({1, 2, 3}), 2, 2), std::invalid_argument);
}

TEST_CASE("identical pooled rows give exactly uniform weights and identity reweighting") {
  // identical rows => tied cosine scores => softmax 1/n, exact for n a power of two
  PooledBundle<double> b;
  Tensor<double> ft({2, 3});
  Tensor<double> fs({4, 3});
  for (std::size_t i = 0; i < ft.rows(); ++i) {
    ft(i, 0) = 0.3;
    ft(i, 1) = -1.2;
    ft(i, 2) = 0.7;
  }
  for (std::size_t i = 0; i < fs.rows(); ++i) {
    fs(i, 0) = 2.0;
    fs(i, 1) = 0.1;
    fs(i, 2) = -0.4;
  }
  b.v_ft = make_const(ft);
  b.v_fs = make_const(fs);
  auto t_cls = basis_text(3, 1, -2.5);
  litevl::text_dependent_reweight(b, t_cls, 1.0);

  CHECK(b.g_t.value()[0] == 0.5);
  CHECK(b.g_t.value()[1] == 0.5);
  for (std::size_t i = 0; i < 4; ++i) CHECK(b.g_s.value()[i] == 0.25);
  // count * (1/count) == 1 exactly, so the reweighted rows are bitwise equal
  CHECK(litevl::bitwise_equal(b.v_ft_tilde.value(), b.v_ft.value()));
  CHECK(litevl::bitwise_equal(b.v_fs_tilde.value(), b.v_fs.value()));
}

TEST_CASE("weights match the frozen softmax of cosine similarities") {
  auto b = orthonormal_bundle(4, 4, 16);
  auto t_cls = basis_text(16, 0);  // aligned with v_ft row 0, orthogonal to the rest
  litevl::text_dependent_reweight(b, t_cls, 1.0);
  // softmax([1,0,0,0]) = [e/(e+3), 1/(e+3) x3]
  CHECK(b.g_t.value()[0] == doctest::Approx(0.47536688641862303).epsilon(1e-12));
  for (std::size_t i = 1; i < 4; ++i) {
    CHECK(b.g_t.value()[i] == doctest::Approx(0.17487770452712566).epsilon(1e-12));
  }
  // orthogonal to every v_fs row: uniform
  for (std::size_t i = 0; i < 4; ++i) CHECK(b.g_s.value()[i] == doctest::Approx(0.25));
}

TEST_CASE("weights are invariant to the text embedding's scale") {
  Rng rng(31);
  PooledBundle<double> a, b;
  a.v_ft = b.v_ft = make_const(litevl::normal_tensor<double>(rng, {3, 6}, 1.0));
  a.v_fs = b.v_fs = make_const(litevl::normal_tensor<double>(rng, {5, 6}, 1.0));
  auto t = litevl::normal_tensor<double>(rng, {1, 6}, 1.0);
  auto t7 = t;
  for (std::size_t i = 0; i < t7.numel(); ++i) t7[i] *= 7.0;
  litevl::text_dependent_reweight(a, make_const(t), 0.7);
  litevl::text_dependent_reweight(b, make_const(t7), 0.7);
  CHECK(litevl::max_abs_diff(a.g_t.value(), b.g_t.value()) < 1e-9);
  CHECK(litevl::max_abs_diff(a.g_s.value(), b.g_s.value()) < 1e-9);
}

TEST_CASE("reweighting conserves total mass") {
  Rng rng(32);
  PooledBundle<double> b;
  b.v_ft = make_const(litevl::normal_tensor<double>(rng, {5, 4}, 1.0));
  b.v_fs = make_const(litevl::normal_tensor<double>(rng, {7, 4}, 1.0));
  litevl::text_dependent_reweight(b, make_const(litevl::normal_tensor<double>(rng, {1, 4}, 1.0)),
                                  0.5);
  double sum_t = 0, sum_s = 0;
  for (std::size_t i = 0; i < 5; ++i) sum_t += 5.0 * b.g_t.value()[i];
  for (std::size_t i = 0; i < 7; ++i) sum_s += 7.0 * b.g_s.value()[i];
  CHECK(std::abs(sum_t - 5.0) < 1e-5);
  CHECK(std::abs(sum_s - 7.0) < 1e-5);
}

TEST_CASE("huge temperature flattens, tiny temperature selects the argmax") {
  auto b_flat = orthonormal_bundle(4, 4, 16);
  auto t_cls = basis_text(16, 0);
  litevl::text_dependent_reweight(b_flat, t_cls, 1e6);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(std::abs(b_flat.g_t.value()[i] - 0.25) < 1e-3);
  }

  auto b_sharp = orthonormal_bundle(4, 4, 16);
  litevl::text_dependent_reweight(b_sharp, t_cls, 1e-6);
  CHECK(b_sharp.g_t.value()[0] > 1.0 - 1e-6);
  for (std::size_t i = 1; i < 4; ++i) CHECK(b_sharp.g_t.value()[i] < 1e-6);
}

TEST_CASE("weights follow a frame permutation") {
  Rng rng(33);
  auto ft = litevl::normal_tensor<double>(rng, {4, 6}, 1.0);
  auto fs = litevl::normal_tensor<double>(rng, {3, 6}, 1.0);
  auto t = litevl::normal_tensor<double>(rng, {1, 6}, 1.0);

  Tensor<double> ft_perm(ft.shape());
  const std::size_t perm[4] = {2, 0, 3, 1};
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 6; ++j) ft_perm(i, j) = ft(perm[i], j);

  PooledBundle<double> a, b;
  a.v_ft = make_const(ft);
  a.v_fs = make_const(fs);
  b.v_ft = make_const(ft_perm);
  b.v_fs = make_const(fs);
  litevl::text_dependent_reweight(a, make_const(t), 1.0);
  litevl::text_dependent_reweight(b, make_const(t), 1.0);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(b.g_t.value()[i] == doctest::Approx(a.g_t.value()[perm[i]]).epsilon(1e-12));
  }
  CHECK(litevl::max_abs_diff(a.g_s.value(), b.g_s.value()) < 1e-12);
}

TEST_CASE("assembled feature rows per mode") {
  auto cfg = toy_config();  // T=2, S=4
  CHECK(litevl::v_f_rows(PoolingMode::kTextDependent, 2, 4) == 15);
  CHECK(litevl::v_f_rows(PoolingMode::kVanilla, 2, 4) == 15);
  CHECK(litevl::v_f_rows(PoolingMode::kOriginal, 2, 4) == 9);
  CHECK(litevl::v_f_rows(PoolingMode::kOriginalTemporal, 2, 4) == 11);
  CHECK(litevl::v_f_rows(PoolingMode::kOriginalSpatial, 2, 4) == 13);
  CHECK(litevl::v_f_rows(PoolingMode::kTextDependent, 4, 16) == 85);

  CHECK(litevl::v_l_row_offset(PoolingMode::kTextDependent, 2, 4) == 6);
  CHECK(litevl::v_l_row_offset(PoolingMode::kOriginal, 2, 4) == 0);
  CHECK(litevl::v_l_row_offset(PoolingMode::kOriginalTemporal, 2, 4) == 2);
  CHECK(litevl::v_l_row_offset(PoolingMode::kOriginalSpatial, 2, 4) == 4);

  litevl::Model<double> model(cfg, 40);
  auto enc = model.forward_video(random_video<double>(cfg, 41));
  auto text = model.forward_text(litevl::TokenSequence{{2, 5}});
  for (auto mode :
       {PoolingMode::kTextDependent, PoolingMode::kVanilla, PoolingMode::kOriginal,
        PoolingMode::kOriginalTemporal, PoolingMode::kOriginalSpatial}) {
    auto c = cfg;
    c.pooling_mode = mode;
    auto bundle = litevl::pool_video(c, enc.v_l, text.t_cls_full);
    CHECK(bundle.v_f.value().rows() == litevl::v_f_rows(mode, cfg.frames, cfg.patches_per_frame));
    CHECK(bundle.v_f.value().cols() == cfg.hidden_dim);
    // the V_L block sits unchanged at its offset
    const std::size_t off = litevl::v_l_row_offset(mode, cfg.frames, cfg.patches_per_frame);
    auto tail = ops::slice_rows(bundle.v_f, off, off + enc.v_l.value().rows());
    CHECK(litevl::bitwise_equal(tail.value(), enc.v_l.value()));
  }
}

TEST_CASE("original mode passes V_L through untouched") {
  auto cfg = toy_config();
  cfg.pooling_mode = PoolingMode::kOriginal;
  litevl::Model<double> model(cfg, 42);
  auto enc = model.forward_video(random_video<double>(cfg, 43));
  auto bundle = litevl::pool_video(cfg, enc.v_l, Var<double>{});  // no text needed
  CHECK(bundle.v_f.node().get() == enc.v_l.node().get());
}

TEST_CASE("uniform weights make text_dependent equal vanilla") {
  auto cfg = toy_config();
  // constant video with flattened position embeddings => every patch token is
  // identical => tied similarities in both pools
  Tensor<double> vid({cfg.frames, cfg.patches_per_frame, cfg.patch_dim()});
  vid.fill(0.5);
  litevl::Model<double> model(cfg, 44);
  model.video.pos_spatial.node()->value.fill(0.0);
  auto enc = model.forward_video(vid);
  auto text = model.forward_text(litevl::TokenSequence{{2, 5}});

  auto td_cfg = cfg;
  td_cfg.pooling_mode = PoolingMode::kTextDependent;
  auto va_cfg = cfg;
  va_cfg.pooling_mode = PoolingMode::kVanilla;
  auto td = litevl::pool_video(td_cfg, enc.v_l, text.t_cls_full);
  auto va = litevl::pool_video(va_cfg, enc.v_l, text.t_cls_full);
  CHECK(litevl::bitwise_equal(td.v_f.value(), va.v_f.value()));
}

TEST_CASE("weighted average collapses to the selected rows at tiny temperature") {
  auto b = orthonormal_bundle(2, 4, 8);
  // text leaning on v_ft row 0 and v_fs row 0 equally
  Tensor<double> t({1, 8});
  t[0] = 1.0;
  t[2] = 1.0;
  litevl::text_dependent_reweight(b, make_const(t), 1e-6);
  auto avg = litevl::pool_weighted_average(b);
  // (T * v_ft[0] + S * v_fs[0]) / (T + S) = (2*e0 + 4*e2) / 6
  CHECK(avg.value().rows() == 1);
  CHECK(avg.value().cols() == 8);
  CHECK(avg.value()[0] == doctest::Approx(2.0 / 6.0).epsilon(1e-6));
  CHECK(avg.value()[2] == doctest::Approx(4.0 / 6.0).epsilon(1e-6));
  CHECK(std::abs(avg.value()[1]) < 1e-6);
  CHECK(std::abs(avg.value()[5]) < 1e-6);
}

TEST_CASE("weighted average equals the dense mean of reweighted rows") {
  Rng rng(45);
  PooledBundle<double> b;
  b.v_ft = make_const(litevl::normal_tensor<double>(rng, {3, 5}, 1.0));
  b.v_fs = make_const(litevl::normal_tensor<double>(rng, {4, 5}, 1.0));
  litevl::text_dependent_reweight(b, make_const(litevl::normal_tensor<double>(rng, {1, 5}, 1.0)),
                                  1.0);
  auto avg = litevl::pool_weighted_average(b);
  for (std::size_t j = 0; j < 5; ++j) {
    double s = 0;
    for (std::size_t i = 0; i < 3; ++i) s += b.v_ft_tilde.value()(i, j);
    for (std::size_t i = 0; i < 4; ++i) s += b.v_fs_tilde.value()(i, j);
    CHECK(avg.value()[j] == doctest::Approx(s / 7.0).epsilon(1e-12));
  }
}

TEST_CASE("weighted average demands a reweighted bundle") {
  auto [v_ft, v_fs] = litevl::mean_pools(tiny_vl({1, 2, 3, 4}), 2, 2);
  PooledBundle<double> b;
  b.v_ft = v_ft;
  b.v_fs = v_fs;
  CHECK_THROWS_AS(litevl::pool_weighted_average(b), std::invalid_argument);
}

TEST_CASE("bad temperature and degenerate rows are rejected") {
  auto b = orthonormal_bundle(2, 2, 4);
  auto t = basis_text(4, 0);
  CHECK_THROWS_AS(litevl::text_dependent_reweight(b, t, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(litevl::text_dependent_reweight(b, t, -1.0), std::invalid_argument);

  PooledBundle<double> z;
  z.v_ft = make_const(Tensor<double>({2, 4}));  // zero rows cannot be normalized
  z.v_fs = make_const(Tensor<double>({2, 4}));
  CHECK_THROWS_AS(litevl::text_dependent_reweight(z, t, 1.0), std::runtime_error);
}

TEST_CASE("pooling gradients match finite differences") {
  auto cfg = toy_config();
  const std::size_t rows = 1 + cfg.frames * cfg.patches_per_frame;
  Rng rng(46);
  auto v_l = make_param(litevl::normal_tensor<double>(rng, {rows, cfg.hidden_dim}, 1.0));
  auto t_cls = make_param(litevl::normal_tensor<double>(rng, {1, cfg.hidden_dim}, 1.0));
  auto w = make_const(litevl::normal_tensor<double>(
      rng, {litevl::v_f_rows(PoolingMode::kTextDependent, cfg.frames, cfg.patches_per_frame),
            cfg.hidden_dim},
      1.0));

  auto loss_fn = [&] {
    auto bundle = litevl::pool_video(cfg, Var<double>(v_l), Var<double>(t_cls));
    return ops::sum_all(ops::mul(bundle.v_f, w));
  };
  std::vector<std::pair<std::string, Var<double>>> params{{"v_l", v_l}, {"t_cls", t_cls}};
  auto rep = litevl::grad_check<double>(loss_fn, params, 1e-5, 24);
  INFO("worst " << rep.worst_param << "[" << rep.worst_coord << "]");
  CHECK(rep.max_rel_err < 1e-4);
}
