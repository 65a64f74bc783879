#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "mshgfn/temporal.hpp"

namespace mshgfn {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<std::vector<double>> m, v;  // per parameter tensor
  std::size_t step = 0;
  AdamConfig cfg;

  void init(const std::vector<NamedParam>& params) {
    m.clear();
    v.clear();
    for (auto& p : params) {
      m.emplace_back(p.tensor->size(), 0.0);
      v.emplace_back(p.tensor->size(), 0.0);
    }
    step = 0;
  }
};

// Standard Adam update with bias correction, reading each tensor's grad.
inline void adam_step(std::vector<NamedParam>& params, AdamState& state,
                      double lr) {
  if (state.m.size() != params.size())
    throw std::runtime_error("adam_step: state not initialized");
  ++state.step;
  double bc1 = 1.0 - std::pow(state.cfg.beta1, static_cast<double>(state.step));
  double bc2 = 1.0 - std::pow(state.cfg.beta2, static_cast<double>(state.step));
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor& t = *params[pi].tensor;
    if (t.grad().size() != t.size())
      throw std::runtime_error("adam_step: missing gradient for " +
                               params[pi].name);
    auto& m = state.m[pi];
    auto& v = state.v[pi];
    for (std::size_t i = 0; i < t.size(); ++i) {
      double g = t.grad()[i];
      m[i] = state.cfg.beta1 * m[i] + (1.0 - state.cfg.beta1) * g;
      v[i] = state.cfg.beta2 * v[i] + (1.0 - state.cfg.beta2) * g * g;
      double m_hat = m[i] / bc1;
      double v_hat = v[i] / bc2;
      t.at(i) -= lr * m_hat / (std::sqrt(v_hat) + state.cfg.epsilon);
    }
  }
}

}  // namespace mshgfn
