#pragma once

#include <random>

#include "mshgfn/ops.hpp"
#include "mshgfn/temporal.hpp"

namespace mshgfn {

// Two fully connected layers mapping fused features to movement
// probabilities; class 1 is "up".
struct PredictorParams {
  Tensor hidden_w;  // D x D
  Tensor hidden_b;  // D
  Tensor out_w;     // D x 2
  Tensor out_b;     // 2

  void init(std::size_t d_model, std::mt19937_64& rng) {
    hidden_w = xavier_uniform(d_model, d_model, rng);
    hidden_b = Tensor({d_model}, 0.0, true);
    out_w = xavier_uniform(d_model, 2, rng);
    out_b = Tensor({2}, 0.0, true);
  }

  void collect(const std::string& prefix, std::vector<NamedParam>& out) {
    out.push_back({prefix + ".hidden_w", &hidden_w});
    out.push_back({prefix + ".hidden_b", &hidden_b});
    out.push_back({prefix + ".out_w", &out_w});
    out.push_back({prefix + ".out_b", &out_b});
  }
};

inline Tensor predict_logits(const Tensor& fused, const PredictorParams& p,
                             double dropout_p, bool training,
                             std::mt19937_64& rng) {
  Tensor hidden =
      ops::relu(ops::add_bias(ops::matmul(fused, p.hidden_w), p.hidden_b));
  hidden = ops::dropout(hidden, dropout_p, training, rng);
  return ops::add_bias(ops::matmul(hidden, p.out_w), p.out_b);
}

inline Tensor predict(const Tensor& fused, const PredictorParams& p,
                      double dropout_p, bool training, std::mt19937_64& rng) {
  return ops::softmax(predict_logits(fused, p, dropout_p, training, rng), 1);
}

}  // namespace mshgfn
