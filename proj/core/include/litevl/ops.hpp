#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "litevl/graph.hpp"
#include "litevl/tensor.hpp"

namespace litevl::ops {

namespace detail {

inline constexpr double kInvSqrt2 = 0.70710678118654752440;
inline constexpr double kInvSqrt2Pi = 0.39894228040143267794;

template <class Real>
void check_2d(const Var<Real>& v, const char* op, const char* role) {
  if (v.value().rank() != 2) {
    throw std::invalid_argument(std::string(op) + ": " + role + " must be rank-2, got " +
                                shape_str(v.value().shape()));
  }
}

template <class Real>
void check_same_shape(const Var<Real>& a, const Var<Real>& b, const char* op) {
  if (a.value().shape() != b.value().shape()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                shape_str(a.value().shape()) + " vs " +
                                shape_str(b.value().shape()));
  }
}

}  // namespace detail

/// (m,k) x (k,n) -> (m,n)
template <class Real>
Var<Real> matmul(const Var<Real>& a, const Var<Real>& b) {
  detail::check_2d(a, "matmul", "lhs");
  detail::check_2d(b, "matmul", "rhs");
  const auto& A = a.value();
  const auto& B = b.value();
  const std::size_t m = A.rows(), k = A.cols(), n = B.cols();
  if (B.rows() != k) {
    throw std::invalid_argument("matmul: inner dims differ, " + shape_str(A.shape()) + " x " +
                                shape_str(B.shape()));
  }
  Tensor<Real> out({m, n});
  {
    const Real* pa = A.data();
    const Real* pb = B.data();
    Real* po = out.data();
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t p = 0; p < k; ++p) {
        const Real aip = pa[i * k + p];
        if (aip == Real(0)) continue;
        const Real* brow = pb + p * n;
        Real* orow = po + i * n;
        for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
      }
    }
  }
  auto an = a.node();
  auto bn = b.node();
  return make_op<Real>(
      "matmul", std::move(out), {an, bn}, [an, bn, m, k, n](Node<Real>& self) {
        const Real* g = self.grad.data();
        if (an->requires_grad) {
          Real* da = an->ensure_grad().data();
          const Real* pb = bn->value.data();
          for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t p = 0; p < k; ++p) {
              const Real* grow = g + i * n;
              const Real* brow = pb + p * n;
              Real acc = 0;
              for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
              da[i * k + p] += acc;
            }
          }
        }
        if (bn->requires_grad) {
          Real* db = bn->ensure_grad().data();
          const Real* pa = an->value.data();
          for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t p = 0; p < k; ++p) {
              const Real aip = pa[i * k + p];
              if (aip == Real(0)) continue;
              const Real* grow = g + i * n;
              Real* drow = db + p * n;
              for (std::size_t j = 0; j < n; ++j) drow[j] += aip * grow[j];
            }
          }
        }
      });
}

template <class Real>
Var<Real> add(const Var<Real>& a, const Var<Real>& b) {
  detail::check_same_shape(a, b, "add");
  Tensor<Real> out(a.value().shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a.value()[i] + b.value()[i];
  auto an = a.node();
  auto bn = b.node();
  return make_op<Real>("add", std::move(out), {an, bn}, [an, bn](Node<Real>& self) {
    if (an->requires_grad) {
      auto& da = an->ensure_grad();
      for (std::size_t i = 0; i < da.numel(); ++i) da[i] += self.grad[i];
    }
    if (bn->requires_grad) {
      auto& db = bn->ensure_grad();
      for (std::size_t i = 0; i < db.numel(); ++i) db[i] += self.grad[i];
    }
  });
}

template <class Real>
Var<Real> sub(const Var<Real>& a, const Var<Real>& b) {
  detail::check_same_shape(a, b, "sub");
  Tensor<Real> out(a.value().shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a.value()[i] - b.value()[i];
  auto an = a.node();
  auto bn = b.node();
  return make_op<Real>("sub", std::move(out), {an, bn}, [an, bn](Node<Real>& self) {
    if (an->requires_grad) {
      auto& da = an->ensure_grad();
      for (std::size_t i = 0; i < da.numel(); ++i) da[i] += self.grad[i];
    }
    if (bn->requires_grad) {
      auto& db = bn->ensure_grad();
      for (std::size_t i = 0; i < db.numel(); ++i) db[i] -= self.grad[i];
    }
  });
}

/// x (m,n) + bias broadcast over rows; bias is (n) or (1,n).
template <class Real>
Var<Real> add_bias(const Var<Real>& x, const Var<Real>& bias) {
  detail::check_2d(x, "add_bias", "input");
  const auto& X = x.value();
  const auto& B = bias.value();
  const std::size_t m = X.rows(), n = X.cols();
  if (B.numel() != n) {
    throw std::invalid_argument("add_bias: bias numel " + std::to_string(B.numel()) +
                                " does not match cols " + std::to_string(n));
  }
  Tensor<Real> out({m, n});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out(i, j) = X(i, j) + B[j];
  auto xn = x.node();
  auto bn = bias.node();
  return make_op<Real>("add_bias", std::move(out), {xn, bn}, [xn, bn, m, n](Node<Real>& self) {
    if (xn->requires_grad) {
      auto& dx = xn->ensure_grad();
      for (std::size_t i = 0; i < dx.numel(); ++i) dx[i] += self.grad[i];
    }
    if (bn->requires_grad) {
      auto& db = bn->ensure_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) db[j] += self.grad[i * n + j];
    }
  });
}

template <class Real>
Var<Real> mul(const Var<Real>& a, const Var<Real>& b) {
  detail::check_same_shape(a, b, "mul");
  Tensor<Real> out(a.value().shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a.value()[i] * b.value()[i];
  auto an = a.node();
  auto bn = b.node();
  return make_op<Real>("mul", std::move(out), {an, bn}, [an, bn](Node<Real>& self) {
    if (an->requires_grad) {
      auto& da = an->ensure_grad();
      for (std::size_t i = 0; i < da.numel(); ++i) da[i] += self.grad[i] * bn->value[i];
    }
    if (bn->requires_grad) {
      auto& db = bn->ensure_grad();
      for (std::size_t i = 0; i < db.numel(); ++i) db[i] += self.grad[i] * an->value[i];
    }
  });
}

/// Multiply by a compile-time-known constant.
template <class Real>
Var<Real> scale(const Var<Real>& x, Real c) {
  Tensor<Real> out(x.value().shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = x.value()[i] * c;
  auto xn = x.node();
  return make_op<Real>("scale", std::move(out), {xn}, [xn, c](Node<Real>& self) {
    if (xn->requires_grad) {
      auto& dx = xn->ensure_grad();
      for (std::size_t i = 0; i < dx.numel(); ++i) dx[i] += self.grad[i] * c;
    }
  });
}

/// Multiply every element by a learnable 1-element factor.
template <class Real>
Var<Real> scale_by(const Var<Real>& x, const Var<Real>& s) {
  if (s.value().numel() != 1) {
    throw std::invalid_argument("scale_by: scale must have one element, got " +
                                shape_str(s.value().shape()));
  }
  const Real sv = s.value()[0];
  Tensor<Real> out(x.value().shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = x.value()[i] * sv;
  auto xn = x.node();
  auto sn = s.node();
  return make_op<Real>("scale_by", std::move(out), {xn, sn}, [xn, sn, sv](Node<Real>& self) {
    if (xn->requires_grad) {
      auto& dx = xn->ensure_grad();
      for (std::size_t i = 0; i < dx.numel(); ++i) dx[i] += self.grad[i] * sv;
    }
    if (sn->requires_grad) {
      auto& ds = sn->ensure_grad();
      Real acc = 0;
      for (std::size_t i = 0; i < self.grad.numel(); ++i) acc += self.grad[i] * xn->value[i];
      ds[0] += acc;
    }
  });
}

/// Row i of x scaled by w[i]; w has m elements for x (m,n).
template <class Real>
Var<Real> scale_rows(const Var<Real>& x, const Var<Real>& w) {
  detail::check_2d(x, "scale_rows", "input");
  const auto& X = x.value();
  const std::size_t m = X.rows(), n = X.cols();
  if (w.value().numel() != m) {
    throw std::invalid_argument("scale_rows: weight numel " + std::to_string(w.value().numel()) +
                                " does not match rows " + std::to_string(m));
  }
  Tensor<Real> out({m, n});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out(i, j) = X(i, j) * w.value()[i];
  auto xn = x.node();
  auto wn = w.node();
  return make_op<Real>("scale_rows", std::move(out), {xn, wn}, [xn, wn, m, n](Node<Real>& self) {
    if (xn->requires_grad) {
      auto& dx = xn->ensure_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) dx[i * n + j] += self.grad[i * n + j] * wn->value[i];
    }
    if (wn->requires_grad) {
      auto& dw = wn->ensure_grad();
      for (std::size_t i = 0; i < m; ++i) {
        Real acc = 0;
        for (std::size_t j = 0; j < n; ++j) acc += self.grad[i * n + j] * xn->value[i * n + j];
        dw[i] += acc;
      }
    }
  });
}

template <class Real>
Var<Real> add_scalar(const Var<Real>& x, Real c) {
  Tensor<Real> out(x.value().shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = x.value()[i] + c;
  auto xn = x.node();
  return make_op<Real>("add_scalar", std::move(out), {xn}, [xn](Node<Real>& self) {
    if (xn->requires_grad) {
      auto& dx = xn->ensure_grad();
      for (std::size_t i = 0; i < dx.numel(); ++i) dx[i] += self.grad[i];
    }
  });
}

template <class Real>
Var<Real> neg(const Var<Real>& x) {
  return scale(x, Real(-1));
}

template <class Real>
Var<Real> exp_op(const Var<Real>& x) {
  Tensor<Real> out(x.value().shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = std::exp(x.value()[i]);
  auto xn = x.node();
  return make_op<Real>("exp", std::move(out), {xn}, [xn](Node<Real>& self) {
    if (xn->requires_grad) {
      auto& dx = xn->ensure_grad();
      for (std::size_t i = 0; i < dx.numel(); ++i) dx[i] += self.grad[i] * self.value[i];
    }
  });
}

template <class Real>
Var<Real> tanh_op(const Var<Real>& x) {
  Tensor<Real> out(x.value().shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = std::tanh(x.value()[i]);
  auto xn = x.node();
  return make_op<Real>("tanh", std::move(out), {xn}, [xn](Node<Real>& self) {
    if (xn->requires_grad) {
      auto& dx = xn->ensure_grad();
      for (std::size_t i = 0; i < dx.numel(); ++i) {
        const Real y = self.value[i];
        dx[i] += self.grad[i] * (Real(1) - y * y);
      }
    }
  });
}

/// Exact gaussian gelu: x * Phi(x).
template <class Real>
Var<Real> gelu(const Var<Real>& x) {
  Tensor<Real> out(x.value().shape());
  for (std::size_t i = 0; i < out.numel(); ++i) {
    const double v = static_cast<double>(x.value()[i]);
    out[i] = static_cast<Real>(v * 0.5 * (1.0 + std::erf(v * detail::kInvSqrt2)));
  }
  auto xn = x.node();
  return make_op<Real>("gelu", std::move(out), {xn}, [xn](Node<Real>& self) {
    if (xn->requires_grad) {
      auto& dx = xn->ensure_grad();
      for (std::size_t i = 0; i < dx.numel(); ++i) {
        const double v = static_cast<double>(xn->value[i]);
        const double phi = 0.5 * (1.0 + std::erf(v * detail::kInvSqrt2));
        const double dens = detail::kInvSqrt2Pi * std::exp(-0.5 * v * v);
        dx[i] += self.grad[i] * static_cast<Real>(phi + v * dens);
      }
    }
  });
}

/// Per-row layer norm with learnable gain/bias vectors of length cols.
template <class Real>
Var<Real> layer_norm(const Var<Real>& x, const Var<Real>& gain, const Var<Real>& bias,
                     Real eps = Real(1e-5)) {
  detail::check_2d(x, "layer_norm", "input");
  const auto& X = x.value();
  const std::size_t m = X.rows(), n = X.cols();
  if (gain.value().numel() != n || bias.value().numel() != n) {
    throw std::invalid_argument("layer_norm: gain/bias must have cols elements");
  }
  Tensor<Real> out({m, n});
  Tensor<Real> xhat({m, n});
  std::vector<Real> inv_std(m);
  for (std::size_t i = 0; i < m; ++i) {
    Real mean = 0;
    for (std::size_t j = 0; j < n; ++j) mean += X(i, j);
    mean /= Real(n);
    Real var = 0;
    for (std::size_t j = 0; j < n; ++j) {
      const Real d = X(i, j) - mean;
      var += d * d;
    }
    var /= Real(n);
    const Real is = Real(1) / std::sqrt(var + eps);
    inv_std[i] = is;
    for (std::size_t j = 0; j < n; ++j) {
      const Real h = (X(i, j) - mean) * is;
      xhat(i, j) = h;
      out(i, j) = gain.value()[j] * h + bias.value()[j];
    }
  }
  auto xn = x.node();
  auto gn = gain.node();
  auto bn = bias.node();
  return make_op<Real>(
      "layer_norm", std::move(out), {xn, gn, bn},
      [xn, gn, bn, m, n, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node<Real>& self) {
        const auto& G = self.grad;
        if (gn->requires_grad) {
          auto& dg = gn->ensure_grad();
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) dg[j] += G[i * n + j] * xhat(i, j);
        }
        if (bn->requires_grad) {
          auto& db = bn->ensure_grad();
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) db[j] += G[i * n + j];
        }
        if (xn->requires_grad) {
          auto& dx = xn->ensure_grad();
          for (std::size_t i = 0; i < m; ++i) {
            Real mean_g = 0, mean_gx = 0;
            for (std::size_t j = 0; j < n; ++j) {
              const Real gh = G[i * n + j] * gn->value[j];
              mean_g += gh;
              mean_gx += gh * xhat(i, j);
            }
            mean_g /= Real(n);
            mean_gx /= Real(n);
            for (std::size_t j = 0; j < n; ++j) {
              const Real gh = G[i * n + j] * gn->value[j];
              dx[i * n + j] += inv_std[i] * (gh - mean_g - xhat(i, j) * mean_gx);
            }
          }
        }
      });
}

/// Row-wise softmax of x / tau, max-subtracted for stability.
template <class Real>
Var<Real> softmax_rows(const Var<Real>& x, Real tau = Real(1)) {
  detail::check_2d(x, "softmax_rows", "input");
  if (!(tau > Real(0))) throw std::invalid_argument("softmax_rows: tau must be positive");
  const auto& X = x.value();
  const std::size_t m = X.rows(), n = X.cols();
  Tensor<Real> out({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    Real mx = X(i, 0) / tau;
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, X(i, j) / tau);
    Real denom = 0;
    for (std::size_t j = 0; j < n; ++j) {
      const Real e = std::exp(X(i, j) / tau - mx);
      out(i, j) = e;
      denom += e;
    }
    for (std::size_t j = 0; j < n; ++j) out(i, j) /= denom;
  }
  auto xn = x.node();
  return make_op<Real>("softmax_rows", std::move(out), {xn}, [xn, m, n, tau](Node<Real>& self) {
    if (xn->requires_grad) {
      auto& dx = xn->ensure_grad();
      for (std::size_t i = 0; i < m; ++i) {
        Real dot = 0;
        for (std::size_t j = 0; j < n; ++j) dot += self.grad[i * n + j] * self.value[i * n + j];
        for (std::size_t j = 0; j < n; ++j) {
          const Real p = self.value[i * n + j];
          dx[i * n + j] += p * (self.grad[i * n + j] - dot) / tau;
        }
      }
    }
  });
}

/// Rows rescaled to unit L2 norm. A row of exact zeros has no direction and
/// raises instead of dividing by zero.
template <class Real>
Var<Real> l2_normalize_rows(const Var<Real>& x) {
  detail::check_2d(x, "l2_normalize_rows", "input");
  const auto& X = x.value();
  const std::size_t m = X.rows(), n = X.cols();
  Tensor<Real> out({m, n});
  std::vector<Real> norms(m);
  for (std::size_t i = 0; i < m; ++i) {
    Real ss = 0;
    for (std::size_t j = 0; j < n; ++j) ss += X(i, j) * X(i, j);
    const Real nr = std::sqrt(ss);
    if (nr == Real(0)) {
      throw std::runtime_error("l2_normalize_rows: row " + std::to_string(i) + " has zero norm");
    }
    norms[i] = nr;
    for (std::size_t j = 0; j < n; ++j) out(i, j) = X(i, j) / nr;
  }
  auto xn = x.node();
  return make_op<Real>("l2_normalize_rows", std::move(out), {xn},
                       [xn, m, n, norms = std::move(norms)](Node<Real>& self) {
                         if (!xn->requires_grad) return;
                         auto& dx = xn->ensure_grad();
                         for (std::size_t i = 0; i < m; ++i) {
                           Real dot = 0;
                           for (std::size_t j = 0; j < n; ++j)
                             dot += self.grad[i * n + j] * self.value[i * n + j];
                           for (std::size_t j = 0; j < n; ++j) {
                             dx[i * n + j] +=
                                 (self.grad[i * n + j] - self.value[i * n + j] * dot) / norms[i];
                           }
                         }
                       });
}

/// Mean along one axis of an N-D tensor; the axis is removed (scalars keep
/// shape {1}).
template <class Real>
Var<Real> mean_over_axis(const Var<Real>& x, std::size_t axis) {
  const auto& X = x.value();
  if (axis >= X.rank()) throw std::invalid_argument("mean_over_axis: axis out of range");
  const Shape& s = X.shape();
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t len = s[axis];
  Shape out_shape;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (i != axis) out_shape.push_back(s[i]);
  if (out_shape.empty()) out_shape = {1};
  Tensor<Real> out(out_shape);
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t a = 0; a < len; ++a)
      for (std::size_t i = 0; i < inner; ++i)
        out[o * inner + i] += X[(o * len + a) * inner + i] / Real(len);
  auto xn = x.node();
  return make_op<Real>("mean_over_axis", std::move(out), {xn},
                       [xn, outer, len, inner](Node<Real>& self) {
                         if (!xn->requires_grad) return;
                         auto& dx = xn->ensure_grad();
                         for (std::size_t o = 0; o < outer; ++o)
                           for (std::size_t a = 0; a < len; ++a)
                             for (std::size_t i = 0; i < inner; ++i)
                               dx[(o * len + a) * inner + i] +=
                                   self.grad[o * inner + i] / Real(len);
                       });
}

template <class Real>
Var<Real> reshape(const Var<Real>& x, Shape new_shape) {
  if (shape_numel(new_shape) != x.value().numel()) {
    throw std::invalid_argument("reshape: numel mismatch, " + shape_str(x.value().shape()) +
                                " -> " + shape_str(new_shape));
  }
  Tensor<Real> out(std::move(new_shape), x.value().storage());
  auto xn = x.node();
  return make_op<Real>("reshape", std::move(out), {xn}, [xn](Node<Real>& self) {
    if (!xn->requires_grad) return;
    auto& dx = xn->ensure_grad();
    for (std::size_t i = 0; i < dx.numel(); ++i) dx[i] += self.grad[i];
  });
}

template <class Real>
Var<Real> transpose(const Var<Real>& x) {
  detail::check_2d(x, "transpose", "input");
  const auto& X = x.value();
  const std::size_t m = X.rows(), n = X.cols();
  Tensor<Real> out({n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out(j, i) = X(i, j);
  auto xn = x.node();
  return make_op<Real>("transpose", std::move(out), {xn}, [xn, m, n](Node<Real>& self) {
    if (!xn->requires_grad) return;
    auto& dx = xn->ensure_grad();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) dx[i * n + j] += self.grad[j * m + i];
  });
}

/// Rows [r0, r1) of a rank-2 tensor.
template <class Real>
Var<Real> slice_rows(const Var<Real>& x, std::size_t r0, std::size_t r1) {
  detail::check_2d(x, "slice_rows", "input");
  const auto& X = x.value();
  const std::size_t m = X.rows(), n = X.cols();
  if (r0 >= r1 || r1 > m) {
    throw std::invalid_argument("slice_rows: bad range [" + std::to_string(r0) + "," +
                                std::to_string(r1) + ") for " + std::to_string(m) + " rows");
  }
  Tensor<Real> out({r1 - r0, n});
  std::copy(X.data() + r0 * n, X.data() + r1 * n, out.data());
  auto xn = x.node();
  return make_op<Real>("slice_rows", std::move(out), {xn}, [xn, r0, n](Node<Real>& self) {
    if (!xn->requires_grad) return;
    auto& dx = xn->ensure_grad();
    for (std::size_t i = 0; i < self.grad.numel(); ++i) dx[r0 * n + i] += self.grad[i];
  });
}

/// Columns [c0, c1) of a rank-2 tensor.
template <class Real>
Var<Real> slice_cols(const Var<Real>& x, std::size_t c0, std::size_t c1) {
  detail::check_2d(x, "slice_cols", "input");
  const auto& X = x.value();
  const std::size_t m = X.rows(), n = X.cols();
  if (c0 >= c1 || c1 > n) {
    throw std::invalid_argument("slice_cols: bad range [" + std::to_string(c0) + "," +
                                std::to_string(c1) + ") for " + std::to_string(n) + " cols");
  }
  const std::size_t w = c1 - c0;
  Tensor<Real> out({m, w});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < w; ++j) out(i, j) = X(i, c0 + j);
  auto xn = x.node();
  return make_op<Real>("slice_cols", std::move(out), {xn}, [xn, m, n, c0, w](Node<Real>& self) {
    if (!xn->requires_grad) return;
    auto& dx = xn->ensure_grad();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < w; ++j) dx[i * n + c0 + j] += self.grad[i * w + j];
  });
}

template <class Real>
Var<Real> concat_rows(const std::vector<Var<Real>>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: no inputs");
  const std::size_t n = parts[0].value().cols();
  std::size_t m = 0;
  for (const auto& p : parts) {
    detail::check_2d(p, "concat_rows", "input");
    if (p.value().cols() != n) throw std::invalid_argument("concat_rows: column count mismatch");
    m += p.value().rows();
  }
  Tensor<Real> out({m, n});
  std::vector<std::shared_ptr<Node<Real>>> nodes;
  std::vector<std::size_t> offsets;
  std::size_t r = 0;
  for (const auto& p : parts) {
    offsets.push_back(r);
    std::copy(p.value().data(), p.value().data() + p.value().numel(), out.data() + r * n);
    r += p.value().rows();
    nodes.push_back(p.node());
  }
  auto nodes_copy = nodes;
  return make_op<Real>("concat_rows", std::move(out), std::move(nodes),
                       [nodes = std::move(nodes_copy), offsets, n](Node<Real>& self) {
                         for (std::size_t k = 0; k < nodes.size(); ++k) {
                           if (!nodes[k]->requires_grad) continue;
                           auto& dx = nodes[k]->ensure_grad();
                           const std::size_t base = offsets[k] * n;
                           for (std::size_t i = 0; i < dx.numel(); ++i)
                             dx[i] += self.grad[base + i];
                         }
                       });
}

template <class Real>
Var<Real> concat_cols(const std::vector<Var<Real>>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  const std::size_t m = parts[0].value().rows();
  std::size_t n = 0;
  for (const auto& p : parts) {
    detail::check_2d(p, "concat_cols", "input");
    if (p.value().rows() != m) throw std::invalid_argument("concat_cols: row count mismatch");
    n += p.value().cols();
  }
  Tensor<Real> out({m, n});
  std::vector<std::shared_ptr<Node<Real>>> nodes;
  std::vector<std::size_t> offsets;
  std::size_t c = 0;
  for (const auto& p : parts) {
    offsets.push_back(c);
    const auto& P = p.value();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < P.cols(); ++j) out(i, c + j) = P(i, j);
    c += P.cols();
    nodes.push_back(p.node());
  }
  auto nodes_copy = nodes;
  return make_op<Real>("concat_cols", std::move(out), std::move(nodes),
                       [nodes = std::move(nodes_copy), offsets, m, n](Node<Real>& self) {
                         for (std::size_t k = 0; k < nodes.size(); ++k) {
                           if (!nodes[k]->requires_grad) continue;
                           auto& dx = nodes[k]->ensure_grad();
                           const std::size_t w = dx.numel() / m;
                           for (std::size_t i = 0; i < m; ++i)
                             for (std::size_t j = 0; j < w; ++j)
                               dx[i * w + j] += self.grad[i * n + offsets[k] + j];
                         }
                       });
}

/// Out row i = x row indices[i]. Duplicate indices accumulate in backward,
/// which is what embedding lookups and tiling need.
template <class Real>
Var<Real> gather_rows(const Var<Real>& x, std::vector<std::size_t> indices) {
  detail::check_2d(x, "gather_rows", "input");
  const auto& X = x.value();
  const std::size_t m = X.rows(), n = X.cols();
  for (std::size_t idx : indices) {
    if (idx >= m) {
      throw std::invalid_argument("gather_rows: index " + std::to_string(idx) + " out of range " +
                                  std::to_string(m));
    }
  }
  Tensor<Real> out({indices.size(), n});
  for (std::size_t i = 0; i < indices.size(); ++i)
    std::copy(X.data() + indices[i] * n, X.data() + (indices[i] + 1) * n, out.data() + i * n);
  auto xn = x.node();
  return make_op<Real>("gather_rows", std::move(out), {xn},
                       [xn, n, indices = std::move(indices)](Node<Real>& self) {
                         if (!xn->requires_grad) return;
                         auto& dx = xn->ensure_grad();
                         for (std::size_t i = 0; i < indices.size(); ++i)
                           for (std::size_t j = 0; j < n; ++j)
                             dx[indices[i] * n + j] += self.grad[i * n + j];
                       });
}

/// Mean over rows of (logsumexp(row) - row[target]); the standard multi-class
/// cross entropy on logits.
template <class Real>
Var<Real> cross_entropy_with_indices(const Var<Real>& logits, const std::vector<std::size_t>& targets) {
  detail::check_2d(logits, "cross_entropy", "logits");
  const auto& Z = logits.value();
  const std::size_t m = Z.rows(), n = Z.cols();
  if (targets.size() != m) {
    throw std::invalid_argument("cross_entropy: " + std::to_string(targets.size()) +
                                " targets for " + std::to_string(m) + " rows");
  }
  for (std::size_t t : targets) {
    if (t >= n) throw std::invalid_argument("cross_entropy: target out of range");
  }
  Tensor<Real> probs({m, n});
  Real loss = 0;
  for (std::size_t i = 0; i < m; ++i) {
    Real mx = Z(i, 0);
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, Z(i, j));
    Real denom = 0;
    for (std::size_t j = 0; j < n; ++j) {
      const Real e = std::exp(Z(i, j) - mx);
      probs(i, j) = e;
      denom += e;
    }
    for (std::size_t j = 0; j < n; ++j) probs(i, j) /= denom;
    loss += mx + std::log(denom) - Z(i, targets[i]);
  }
  loss /= Real(m);
  auto zn = logits.node();
  return make_op<Real>("cross_entropy", Tensor<Real>::scalar(loss), {zn},
                       [zn, m, n, targets, probs = std::move(probs)](Node<Real>& self) {
                         if (!zn->requires_grad) return;
                         auto& dz = zn->ensure_grad();
                         const Real g = self.grad[0] / Real(m);
                         for (std::size_t i = 0; i < m; ++i)
                           for (std::size_t j = 0; j < n; ++j) {
                             Real p = probs(i, j);
                             if (j == targets[i]) p -= Real(1);
                             dz[i * n + j] += g * p;
                           }
                       });
}

template <class Real>
Var<Real> sum_all(const Var<Real>& x) {
  Real s = 0;
  for (std::size_t i = 0; i < x.value().numel(); ++i) s += x.value()[i];
  auto xn = x.node();
  return make_op<Real>("sum_all", Tensor<Real>::scalar(s), {xn}, [xn](Node<Real>& self) {
    if (!xn->requires_grad) return;
    auto& dx = xn->ensure_grad();
    for (std::size_t i = 0; i < dx.numel(); ++i) dx[i] += self.grad[0];
  });
}

template <class Real>
Var<Real> mean_all(const Var<Real>& x) {
  const std::size_t n = x.value().numel();
  Real s = 0;
  for (std::size_t i = 0; i < n; ++i) s += x.value()[i];
  s /= Real(n);
  auto xn = x.node();
  return make_op<Real>("mean_all", Tensor<Real>::scalar(s), {xn}, [xn, n](Node<Real>& self) {
    if (!xn->requires_grad) return;
    auto& dx = xn->ensure_grad();
    for (std::size_t i = 0; i < dx.numel(); ++i) dx[i] += self.grad[0] / Real(n);
  });
}

template <class Real>
Var<Real> row(const Var<Real>& x, std::size_t i) {
  return slice_rows(x, i, i + 1);
}

}  // namespace litevl::ops
