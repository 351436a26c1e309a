#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "litevl/config.hpp"
#include "litevl/model.hpp"

namespace litevl {

/// Linear warmup to the peak rate, then linear decay; never reaches zero
/// inside the run.
inline double lr_at_step(const TrainConfig& tc, std::size_t step, std::size_t total_steps) {
  if (total_steps == 0) throw std::invalid_argument("lr_at_step: zero total steps");
  if (step >= total_steps) throw std::invalid_argument("lr_at_step: step beyond schedule");
  const auto warmup = static_cast<std::size_t>(tc.warmup_ratio * static_cast<double>(total_steps));
  if (warmup > 0 && step < warmup) {
    return tc.learning_rate * static_cast<double>(step + 1) / static_cast<double>(warmup);
  }
  return tc.learning_rate * static_cast<double>(total_steps - step) /
         static_cast<double>(total_steps - warmup);
}

/// AdamW with decoupled weight decay. One state slot per registry entry; the
/// temporal-scaling bank trains at scaling_lr_multiplier x the step rate.
template <class Real>
class AdamW {
 public:
  AdamW(Model<Real>& model, const TrainConfig& tc, std::size_t total_steps)
      : model_(model), tc_(tc), total_steps_(total_steps) {
    tc.validate();
    if (total_steps == 0) throw std::invalid_argument("optimizer needs a positive step budget");
    for (const auto& e : model.params()) {
      m_.emplace_back(e.var.value().shape());
      v_.emplace_back(e.var.value().shape());
    }
  }

  std::size_t step_count() const { return t_; }

  double current_lr() const {
    return lr_at_step(tc_, t_ < total_steps_ ? t_ : total_steps_ - 1, total_steps_);
  }

  /// Applies one update from the gradients currently stored on the parameters.
  /// Parameters backward never reached keep their values.
  void step() {
    const double lr = lr_at_step(tc_, t_, total_steps_);
    ++t_;
    const double b1 = tc_.beta1, b2 = tc_.beta2;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    const auto& entries = model_.params();
    for (std::size_t p = 0; p < entries.size(); ++p) {
      auto& node = *entries[p].var.node();
      if (node.grad.numel() != node.value.numel()) continue;
      const double plr = lr * (entries[p].scaling_lr ? tc_.scaling_lr_multiplier : 1.0);
      auto& m = m_[p];
      auto& v = v_[p];
      for (std::size_t i = 0; i < node.value.numel(); ++i) {
        const double g = static_cast<double>(node.grad[i]);
        m[i] = static_cast<Real>(b1 * static_cast<double>(m[i]) + (1.0 - b1) * g);
        v[i] = static_cast<Real>(b2 * static_cast<double>(v[i]) + (1.0 - b2) * g * g);
        const double mhat = static_cast<double>(m[i]) / bc1;
        const double vhat = static_cast<double>(v[i]) / bc2;
        double x = static_cast<double>(node.value[i]);
        x -= plr * (mhat / (std::sqrt(vhat) + kEps) + tc_.weight_decay * x);
        node.value[i] = static_cast<Real>(x);
      }
    }
  }

  static constexpr double kEps = 1e-8;

 private:
  Model<Real>& model_;
  TrainConfig tc_;
  std::size_t total_steps_;
  std::size_t t_ = 0;
  std::vector<Tensor<Real>> m_, v_;
};

}  // namespace litevl
