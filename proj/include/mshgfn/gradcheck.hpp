#pragma once

#include <cmath>
#include <functional>

#include "mshgfn/tensor.hpp"

namespace mshgfn {

// Central-difference verification of an analytic gradient.
//
// `f` must be a deterministic map from the current values of `x` to a scalar
// (re-running the whole forward pass; dropout disabled or re-seeded).
// `analytic` is the gradient to verify, laid out like x.values().
// Returns max over coordinates of |analytic - fd| / max(1, |fd|).
inline double finite_difference_check(
    const std::function<double()>& f, Tensor& x,
    const std::vector<double>& analytic, double eps = 1e-4) {
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double saved = x.at(i);
    x.at(i) = saved + eps;
    double up = f();
    x.at(i) = saved - eps;
    double down = f();
    x.at(i) = saved;
    double fd = (up - down) / (2.0 * eps);
    double err = std::abs(analytic[i] - fd) / std::max(1.0, std::abs(fd));
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace mshgfn
