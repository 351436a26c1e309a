#include <cmath>
#include <map>
#include <string>

#include "doctest.h"
#include "litevl/model.hpp"
#include "litevl/optimizer.hpp"
#include "toy_setup.hpp"

using namespace litevl;

namespace {

TrainConfig quiet_tc() {
  TrainConfig tc;
  tc.frames_train = toy_config().frames;
  tc.frames_eval = toy_config().frames;
  return tc;
}

template <class Real>
bool states_bitwise_equal(const std::map<std::string, Tensor<Real>>& a,
                          const std::map<std::string, Tensor<Real>>& b) {
  if (a.size() != b.size()) return false;
  for (const auto& [name, ta] : a) {
    auto it = b.find(name);
    if (it == b.end()) return false;
    if (ta.shape() != it->second.shape()) return false;
    for (std::size_t i = 0; i < ta.numel(); ++i) {
      if (ta[i] != it->second[i]) return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("lr schedule warms up linearly then decays linearly") {
  auto tc = quiet_tc();
  tc.learning_rate = 1e-3;
  tc.warmup_ratio = 0.1;
  const std::size_t total = 100;  // warmup over the first 10 steps

  CHECK(lr_at_step(tc, 0, total) == doctest::Approx(1e-4).epsilon(1e-12));
  CHECK(lr_at_step(tc, 4, total) == doctest::Approx(5e-4).epsilon(1e-12));
  CHECK(lr_at_step(tc, 9, total) == doctest::Approx(1e-3).epsilon(1e-12));
  CHECK(lr_at_step(tc, 10, total) == doctest::Approx(1e-3).epsilon(1e-12));
  CHECK(lr_at_step(tc, 55, total) == doctest::Approx(1e-3 * 45.0 / 90.0).epsilon(1e-12));
  CHECK(lr_at_step(tc, 99, total) == doctest::Approx(1e-3 / 90.0).epsilon(1e-12));
}

TEST_CASE("lr schedule peaks at the end of warmup and never hits zero") {
  auto tc = quiet_tc();
  tc.learning_rate = 0.7;
  tc.warmup_ratio = 0.2;
  const std::size_t total = 37;
  double peak = 0;
  for (std::size_t s = 0; s < total; ++s) {
    const double lr = lr_at_step(tc, s, total);
    CHECK(lr > 0.0);
    CHECK(lr <= tc.learning_rate + 1e-15);
    peak = std::max(peak, lr);
  }
  CHECK(peak == doctest::Approx(tc.learning_rate).epsilon(1e-12));
  // monotone up through warmup, monotone down after
  const std::size_t warmup = static_cast<std::size_t>(tc.warmup_ratio * total);
  for (std::size_t s = 1; s < warmup; ++s) {
    CHECK(lr_at_step(tc, s, total) > lr_at_step(tc, s - 1, total));
  }
  for (std::size_t s = warmup + 1; s < total; ++s) {
    CHECK(lr_at_step(tc, s, total) < lr_at_step(tc, s - 1, total));
  }
}

TEST_CASE("zero warmup starts at the full rate") {
  auto tc = quiet_tc();
  tc.learning_rate = 0.5;
  tc.warmup_ratio = 0.0;
  CHECK(lr_at_step(tc, 0, 10) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("lr schedule rejects out-of-range steps") {
  auto tc = quiet_tc();
  CHECK_THROWS_AS(lr_at_step(tc, 0, 0), std::invalid_argument);
  CHECK_THROWS_AS(lr_at_step(tc, 10, 10), std::invalid_argument);
}

TEST_CASE("a step with zero learning rate leaves every parameter unchanged") {
  auto cfg = toy_config();
  Model<float> model(cfg, 11);
  auto before = model.state_dict();

  auto tc = quiet_tc();
  tc.learning_rate = 0.0;
  tc.weight_decay = 0.01;
  AdamW<float> opt(model, tc, 5);

  auto video = random_video<float>(cfg, 1);
  auto out = model.forward_video(video);
  model.zero_grads();
  backward(ops::sum_all(out.v_cls));
  opt.step();

  CHECK(states_bitwise_equal(before, model.state_dict()));
}

TEST_CASE("adamw drives a quadratic to its minimum") {
  auto cfg = toy_config();
  Model<double> model(cfg, 3);
  auto tc = quiet_tc();
  tc.learning_rate = 0.05;
  tc.weight_decay = 0.0;
  tc.warmup_ratio = 0.0;
  const std::size_t steps = 500;
  AdamW<double> opt(model, tc, steps);

  auto target = Tensor<double>({2});
  target[0] = 3.0;
  target[1] = -1.0;
  auto target_leaf = make_leaf(target, /*requires_grad=*/false);

  auto b = model.param("head.vtm.b");
  for (std::size_t s = 0; s < steps; ++s) {
    auto diff = ops::sub(b, target_leaf);
    auto loss = ops::sum_all(ops::mul(diff, diff));
    model.zero_grads();
    backward(loss);
    opt.step();
  }
  CHECK(std::abs(b.value()[0] - 3.0) < 1e-2);
  CHECK(std::abs(b.value()[1] + 1.0) < 1e-2);
}

TEST_CASE("parameters outside the graph are skipped entirely") {
  auto cfg = toy_config();
  Model<float> model(cfg, 4);
  auto tc = quiet_tc();
  tc.learning_rate = 0.1;
  tc.weight_decay = 0.1;
  AdamW<float> opt(model, tc, 3);

  // the bias starts at zero, where its quadratic gradient vanishes
  model.param("head.vtm.b").node()->value[0] = 0.5f;
  model.param("head.vtm.b").node()->value[1] = -0.25f;
  auto before_qa = model.param("head.qa.w1").value();
  auto before_b = model.param("head.vtm.b").value();

  auto b = model.param("head.vtm.b");
  model.zero_grads();
  backward(ops::sum_all(ops::mul(b, b)));
  opt.step();

  auto after_qa = model.param("head.qa.w1").value();
  bool qa_unchanged = true;
  for (std::size_t i = 0; i < after_qa.numel(); ++i) {
    if (after_qa[i] != before_qa[i]) qa_unchanged = false;
  }
  CHECK(qa_unchanged);

  bool b_changed = false;
  auto after_b = model.param("head.vtm.b").value();
  for (std::size_t i = 0; i < after_b.numel(); ++i) {
    if (after_b[i] != before_b[i]) b_changed = true;
  }
  CHECK(b_changed);
}

TEST_CASE("the scaling multiplier applies to the temporal bank and nothing else") {
  auto cfg = toy_config();
  Model<double> a(cfg, 21);
  Model<double> b(cfg, 21);

  auto tc1 = quiet_tc();
  tc1.learning_rate = 1e-2;
  tc1.weight_decay = 0.0;
  tc1.warmup_ratio = 0.0;
  auto tc2 = tc1;
  tc1.scaling_lr_multiplier = 1.0;
  tc2.scaling_lr_multiplier = 2.0;

  AdamW<double> oa(a, tc1, 4);
  AdamW<double> ob(b, tc2, 4);

  auto video = random_video<double>(cfg, 6);
  for (Model<double>* m : {&a, &b}) {
    auto out = m->forward_video(video);
    m->zero_grads();
    backward(ops::sum_all(out.v_cls));
  }
  auto gamma_before = a.param("video.gamma").value();
  oa.step();
  ob.step();

  for (const auto& e : a.params()) {
    const auto& va = e.var.value();
    const auto& vb = b.param(e.name).value();
    bool equal = true;
    for (std::size_t i = 0; i < va.numel(); ++i) {
      if (va[i] != vb[i]) equal = false;
    }
    if (e.name == "video.gamma") {
      CHECK(!equal);
      // doubled multiplier doubles the raw update exactly
      for (std::size_t i = 0; i < va.numel(); ++i) {
        const double da = va[i] - gamma_before[i];
        const double db = vb[i] - gamma_before[i];
        if (da != 0.0) CHECK(db / da == doctest::Approx(2.0).epsilon(1e-9));
      }
    } else {
      CHECK(equal);
    }
  }
}

TEST_CASE("optimizer construction validates its config") {
  auto cfg = toy_config();
  Model<float> model(cfg, 1);
  auto tc = quiet_tc();
  tc.beta1 = 1.5;
  CHECK_THROWS_AS(AdamW<float>(model, tc, 10), std::invalid_argument);
  auto tc2 = quiet_tc();
  CHECK_THROWS_AS(AdamW<float>(model, tc2, 0), std::invalid_argument);
}
