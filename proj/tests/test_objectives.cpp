#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "doctest.h"
#include "litevl/attention.hpp"
#include "litevl/gradcheck.hpp"
#include "litevl/objectives.hpp"
#include "toy_setup.hpp"

using litevl::make_const;
using litevl::make_param;
using litevl::Rng;
using litevl::Tensor;
using litevl::Var;
namespace ops = litevl::ops;

namespace {

Var<double> identity_rows(std::size_t n, std::size_t dim) {
  Tensor<double> m({n, dim});
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return make_const(m);
}

Var<double> unit_log_tau() { return litevl::init_log_tau_c<double>(1.0); }

Var<double> random_unit_rows(Rng& rng, std::size_t n, std::size_t dim) {
  return ops::l2_normalize_rows(make_const(litevl::normal_tensor<double>(rng, {n, dim}, 1.0)));
}

}  // namespace

TEST_CASE("contrastive loss over a single pair is exactly zero") {
  auto v = identity_rows(1, 4);
  auto t = identity_rows(1, 4);
  auto loss = litevl::vtc_loss(v, t, unit_log_tau());
  CHECK(loss.value()[0] == 0.0);
}

TEST_CASE("contrastive loss on orthonormal aligned pairs matches the closed form") {
  // M = I at tau=1: per row -log(e / (e + 1)) = log(1 + exp(-1))
  auto v = identity_rows(2, 2);
  auto t = identity_rows(2, 2);
  auto loss = litevl::vtc_loss(v, t, unit_log_tau());
  CHECK(loss.value()[0] == doctest::Approx(0.31326168751822286).epsilon(1e-14));
}

TEST_CASE("contrastive loss is symmetric in its arguments") {
  Rng rng(50);
  auto v = random_unit_rows(rng, 4, 6);
  auto t = random_unit_rows(rng, 4, 6);
  auto tau = unit_log_tau();
  auto a = litevl::vtc_loss(v, t, tau);
  auto b = litevl::vtc_loss(t, v, tau);
  CHECK(a.value()[0] == b.value()[0]);
}

TEST_CASE("contrastive loss is invariant to reordering the batch") {
  Rng rng(51);
  auto vt = litevl::normal_tensor<double>(rng, {4, 6}, 1.0);
  auto tt = litevl::normal_tensor<double>(rng, {4, 6}, 1.0);
  const std::size_t perm[4] = {3, 1, 0, 2};
  Tensor<double> vp(vt.shape()), tp(tt.shape());
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 6; ++j) {
      vp(i, j) = vt(perm[i], j);
      tp(i, j) = tt(perm[i], j);
    }
  }
  auto tau = unit_log_tau();
  auto a = litevl::vtc_loss(ops::l2_normalize_rows(make_const(vt)),
                            ops::l2_normalize_rows(make_const(tt)), tau);
  auto b = litevl::vtc_loss(ops::l2_normalize_rows(make_const(vp)),
                            ops::l2_normalize_rows(make_const(tp)), tau);
  CHECK(a.value()[0] == doctest::Approx(b.value()[0]).epsilon(1e-12));
}

TEST_CASE("contrastive loss rejects non-normalized rows") {
  Tensor<double> bad({2, 3});
  bad(0, 0) = 2.0;
  bad(1, 1) = 1.0;
  auto good = identity_rows(2, 3);
  CHECK_THROWS_AS(litevl::vtc_loss(make_const(bad), good, unit_log_tau()),
                  std::invalid_argument);
  CHECK_THROWS_AS(litevl::vtc_loss(good, make_const(bad), unit_log_tau()),
                  std::invalid_argument);
}

TEST_CASE("temperature scaling matches a direct computation") {
  auto v = identity_rows(2, 2);
  auto t = identity_rows(2, 2);
  auto log_tau = litevl::init_log_tau_c<double>(0.07);
  auto ms = litevl::scaled_similarity(v, t, log_tau);
  CHECK(ms.value()(0, 0) == doctest::Approx(1.0 / 0.07).epsilon(1e-12));
  CHECK(ms.value()(0, 1) == doctest::Approx(0.0));
}

TEST_CASE("the learned temperature receives gradient") {
  Rng rng(52);
  auto v = random_unit_rows(rng, 3, 5);
  auto t = random_unit_rows(rng, 3, 5);
  auto log_tau = litevl::init_log_tau_c<double>(0.07);
  auto loss = litevl::vtc_loss(v, t, log_tau);
  litevl::backward(loss);
  CHECK(std::abs(log_tau.grad()[0]) > 1e-8);
}

TEST_CASE("mining with two pairs always picks the only other index") {
  Tensor<double> m({2, 2});
  m(0, 0) = 3.0;
  m(0, 1) = -1.0;
  m(1, 0) = 0.5;
  m(1, 1) = 2.0;
  Rng rng(53);
  for (int rep = 0; rep < 100; ++rep) {
    auto mined = litevl::mine_hard_negatives(m, rng);
    CHECK(mined.text_for_video[0] == 1);
    CHECK(mined.text_for_video[1] == 0);
    CHECK(mined.video_for_text[0] == 1);
    CHECK(mined.video_for_text[1] == 0);
  }
}

TEST_CASE("mining frequencies follow the similarity softmax") {
  // row 0 off-diagonal scores 5 and -5: P(pick col 1) = 1 / (1 + e^-10)
  Tensor<double> m({3, 3});
  m(0, 1) = 5.0;
  m(0, 2) = -5.0;
  m(1, 0) = 0.0;
  m(1, 2) = 0.0;
  m(2, 0) = 0.0;
  m(2, 1) = 0.0;
  Rng rng(54);
  const int draws = 100000;
  int picked_1 = 0;
  for (int i = 0; i < draws; ++i) {
    auto mined = litevl::mine_hard_negatives(m, rng);
    if (mined.text_for_video[0] == 1) ++picked_1;
    CHECK(mined.text_for_video[0] != 0);  // diagonal is masked out
    CHECK(mined.video_for_text[1] != 1);
  }
  const double p = static_cast<double>(picked_1) / draws;
  CHECK(p == doctest::Approx(0.9999546021312976).epsilon(0.002));
}

TEST_CASE("mining rejects degenerate batches") {
  Rng rng(55);
  Tensor<double> one({1, 1});
  CHECK_THROWS_AS(litevl::mine_hard_negatives(one, rng), std::invalid_argument);
  Tensor<double> rect({2, 3});
  CHECK_THROWS_AS(litevl::mine_hard_negatives(rect, rng), std::invalid_argument);
}

TEST_CASE("matching loss with a silent head is ln 2") {
  Rng rng(56);
  auto pos = make_const(litevl::normal_tensor<double>(rng, {3, 6}, 1.0));
  auto vneg = make_const(litevl::normal_tensor<double>(rng, {3, 6}, 1.0));
  auto tneg = make_const(litevl::normal_tensor<double>(rng, {3, 6}, 1.0));
  auto w = make_const(Tensor<double>({6, 2}));
  auto b = make_const(Tensor<double>({2}));
  auto loss = litevl::vtm_loss(pos, vneg, tneg, w, b);
  CHECK(loss.value()[0] == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("matching loss vanishes for a perfectly separating head") {
  // matched rows carry +25 in coordinate 0, mismatched -25; head reads it out
  Tensor<double> posf({2, 3}), negf({2, 3});
  posf(0, 0) = 25.0;
  posf(1, 0) = 25.0;
  negf(0, 0) = -25.0;
  negf(1, 0) = -25.0;
  Tensor<double> w({3, 2});
  w(0, 1) = 1.0;  // class 1 logit = coordinate 0
  auto loss = litevl::vtm_loss(make_const(posf), make_const(negf), make_const(negf),
                               make_const(w), make_const(Tensor<double>({2})));
  CHECK(loss.value()[0] < 1e-3);
}

TEST_CASE("matching loss starts near chance under the usual init scale") {
  for (std::uint64_t seed = 100; seed < 110; ++seed) {
    Rng rng(seed);
    auto pos = make_const(litevl::normal_tensor<double>(rng, {4, 8}, 1.0));
    auto vneg = make_const(litevl::normal_tensor<double>(rng, {4, 8}, 1.0));
    auto tneg = make_const(litevl::normal_tensor<double>(rng, {4, 8}, 1.0));
    auto w = make_const(litevl::normal_tensor<double>(rng, {8, 2}, litevl::kInitStd));
    auto b = make_const(Tensor<double>({2}));
    auto loss = litevl::vtm_loss(pos, vneg, tneg, w, b);
    CHECK(loss.value()[0] == doctest::Approx(std::log(2.0)).epsilon(0.3));
  }
}

TEST_CASE("match score helpers agree") {
  Tensor<double> logits({2});
  SUBCASE("tied logits give log one half") {
    CHECK(litevl::vtm_match_log_prob(logits) == doctest::Approx(-std::log(2.0)).epsilon(1e-14));
  }
  SUBCASE("large margin saturates") {
    logits[0] = -10.0;
    logits[1] = 10.0;
    CHECK(litevl::vtm_match_log_prob(logits) == doctest::Approx(0.0).epsilon(1e-8));
  }
  SUBCASE("logit slice picks the matched class") {
    Rng rng(57);
    auto t_enc = make_const(litevl::normal_tensor<double>(rng, {1, 4}, 1.0));
    auto w = make_const(litevl::normal_tensor<double>(rng, {4, 2}, 1.0));
    auto b = make_const(litevl::normal_tensor<double>(rng, {2}, 1.0));
    auto full = ops::add_bias(ops::matmul(t_enc, w), b);
    auto m = litevl::vtm_match_logit(t_enc, w, b);
    CHECK(m.value().numel() == 1);
    CHECK(m.value()[0] == full.value()[1]);
  }
}

TEST_CASE("answer loss with silent heads is ln K, and trivial with one class") {
  Rng rng(58);
  auto t_enc = make_const(litevl::normal_tensor<double>(rng, {3, 6}, 1.0));
  auto w1 = make_const(Tensor<double>({6, 6}));
  auto b1 = make_const(Tensor<double>({6}));
  auto w2 = make_const(Tensor<double>({6, 4}));
  auto b2 = make_const(Tensor<double>({4}));
  auto loss = litevl::vqa_loss(t_enc, w1, b1, w2, b2, {0, 3, 1});
  CHECK(loss.value()[0] == doctest::Approx(std::log(4.0)).epsilon(1e-12));

  auto w2_one = make_const(Tensor<double>({6, 1}));
  auto b2_one = make_const(Tensor<double>({1}));
  auto trivial = litevl::vqa_loss(t_enc, w1, b1, w2_one, b2_one, {0, 0, 0});
  CHECK(trivial.value()[0] == 0.0);
}

TEST_CASE("answer loss rejects out-of-range labels") {
  Rng rng(59);
  auto t_enc = make_const(litevl::normal_tensor<double>(rng, {2, 4}, 1.0));
  auto w1 = make_const(Tensor<double>({4, 4}));
  auto b1 = make_const(Tensor<double>({4}));
  auto w2 = make_const(Tensor<double>({4, 3}));
  auto b2 = make_const(Tensor<double>({3}));
  CHECK_THROWS_AS(litevl::vqa_loss(t_enc, w1, b1, w2, b2, {0, 3}), std::invalid_argument);
}

TEST_CASE("answer loss saturates when the right logit dominates by a wide margin") {
  Tensor<double> t_enc_t({1, 2});
  t_enc_t(0, 0) = 1.0;
  Tensor<double> w1({2, 2});
  w1(0, 0) = 30.0;  // gelu(30) = 30 to machine precision
  Tensor<double> w2({2, 3});
  w2(0, 2) = 1.0;
  auto loss = litevl::vqa_loss(make_const(t_enc_t), make_const(w1),
                               make_const(Tensor<double>({2})), make_const(w2),
                               make_const(Tensor<double>({3})), {2});
  CHECK(loss.value()[0] < 1e-6);
}

TEST_CASE("combined retrieval loss is the plain sum") {
  auto v = identity_rows(2, 2);
  auto t = identity_rows(2, 2);
  auto vtc = litevl::vtc_loss(v, t, unit_log_tau());

  Rng rng(60);
  auto pos = make_const(litevl::normal_tensor<double>(rng, {2, 4}, 1.0));
  auto w = make_const(Tensor<double>({4, 2}));
  auto b = make_const(Tensor<double>({2}));
  auto vtm = litevl::vtm_loss(pos, pos, pos, w, b);

  auto total = litevl::retrieval_loss(vtc, vtm);
  CHECK(total.value()[0] == doctest::Approx(0.31326168751822286 + std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("objective gradients match finite differences") {
  Rng rng(61);
  const std::size_t b = 3, d = 5;
  auto raw_v = make_param(litevl::normal_tensor<double>(rng, {b, d}, 1.0));
  auto raw_t = make_param(litevl::normal_tensor<double>(rng, {b, d}, 1.0));
  auto log_tau = litevl::init_log_tau_c<double>(0.5);
  auto pos = make_param(litevl::normal_tensor<double>(rng, {b, d}, 1.0));
  auto vneg = make_param(litevl::normal_tensor<double>(rng, {b, d}, 1.0));
  auto tneg = make_param(litevl::normal_tensor<double>(rng, {b, d}, 1.0));
  auto head_w = make_param(litevl::normal_tensor<double>(rng, {d, 2}, 0.5));
  auto head_b = make_param(litevl::normal_tensor<double>(rng, {2}, 0.5));
  auto qa_w1 = make_param(litevl::normal_tensor<double>(rng, {d, d}, 0.5));
  auto qa_b1 = make_param(litevl::normal_tensor<double>(rng, {d}, 0.5));
  auto qa_w2 = make_param(litevl::normal_tensor<double>(rng, {d, 4}, 0.5));
  auto qa_b2 = make_param(litevl::normal_tensor<double>(rng, {4}, 0.5));

  auto loss_fn = [&] {
    auto vtc = litevl::vtc_loss(ops::l2_normalize_rows(Var<double>(raw_v)),
                                ops::l2_normalize_rows(Var<double>(raw_t)), log_tau);
    auto vtm = litevl::vtm_loss(Var<double>(pos), Var<double>(vneg), Var<double>(tneg),
                                Var<double>(head_w), Var<double>(head_b));
    auto vqa = litevl::vqa_loss(Var<double>(pos), Var<double>(qa_w1), Var<double>(qa_b1),
                                Var<double>(qa_w2), Var<double>(qa_b2), {1, 0, 3});
    return ops::add(litevl::retrieval_loss(vtc, vtm), vqa);
  };
  std::vector<std::pair<std::string, Var<double>>> params{
      {"raw_v", raw_v},   {"raw_t", raw_t},   {"log_tau", log_tau}, {"pos", pos},
      {"vneg", vneg},     {"tneg", tneg},     {"head_w", head_w},   {"head_b", head_b},
      {"qa_w1", qa_w1},   {"qa_b1", qa_b1},   {"qa_w2", qa_w2},     {"qa_b2", qa_b2}};
  auto rep = litevl::grad_check<double>(loss_fn, params, 1e-5, 10);
  INFO("worst " << rep.worst_param << "[" << rep.worst_coord << "]");
  CHECK(rep.max_rel_err < 1e-4);
}
