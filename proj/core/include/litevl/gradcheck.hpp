#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "litevl/graph.hpp"
#include "litevl/tensor.hpp"

namespace litevl {

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::string worst_param;
  std::size_t worst_coord = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t coords_checked = 0;
};

/// Central finite differences against reverse-mode gradients.
///
/// `loss_fn` must rebuild the graph from the params' current tensor values on
/// every call. Relative error per coordinate is |a - n| / max(1, |n|); the
/// report carries the max. Runs in whatever Real the caller instantiated, but
/// only double is trustworthy: float cancels most of the stencil.
template <class Real>
GradCheckReport grad_check(const std::function<Var<Real>()>& loss_fn,
                           const std::vector<std::pair<std::string, Var<Real>>>& params,
                           double h = 1e-5, std::size_t max_coords_per_param = 0) {
  for (const auto& [name, p] : params) {
    p.node()->zero_grad();
  }
  Var<Real> loss = loss_fn();
  backward(loss);

  std::vector<Tensor<Real>> analytic;
  analytic.reserve(params.size());
  for (const auto& [name, p] : params) {
    auto* node = p.node().get();
    if (node->grad.numel() == node->value.numel()) {
      analytic.push_back(node->grad);
    } else {
      analytic.push_back(Tensor<Real>(node->value.shape()));  // param never reached: zeros
    }
  }

  GradCheckReport report;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto& vals = params[pi].second.node()->value;
    const std::size_t n = vals.numel();
    std::size_t count = n;
    if (max_coords_per_param > 0 && max_coords_per_param < n) count = max_coords_per_param;
    for (std::size_t c = 0; c < count; ++c) {
      const std::size_t idx = (count == n) ? c : c * n / count;
      const Real saved = vals[idx];
      double plus, minus;
      {
        NoGradGuard guard;
        vals[idx] = saved + static_cast<Real>(h);
        plus = static_cast<double>(loss_fn().value()[0]);
        vals[idx] = saved - static_cast<Real>(h);
        minus = static_cast<double>(loss_fn().value()[0]);
      }
      vals[idx] = saved;
      const double numeric = (plus - minus) / (2.0 * h);
      const double a = static_cast<double>(analytic[pi][idx]);
      const double rel = std::abs(a - numeric) / std::max(1.0, std::abs(numeric));
      ++report.coords_checked;
      if (rel > report.max_rel_err) {
        report.max_rel_err = rel;
        report.worst_param = params[pi].first;
        report.worst_coord = idx;
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
    }
  }
  return report;
}

}  // namespace litevl
