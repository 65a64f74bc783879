#pragma once

#include <random>
#include <vector>

#include "mshgfn/ops.hpp"
#include "mshgfn/temporal.hpp"

namespace mshgfn {

struct GateStats {
  double mean = 0.0;
  double stdev = 0.0;
};

// Top-down gated fusion across scales.  The coarsest embedding is projected
// once; descending levels mix through a per-stock sigmoid gate followed by
// layer normalization.
struct FusionParams {
  Tensor top_proj;                    // W_l: D x D, applied at the anchor
  std::vector<Tensor> gate_weight;    // per descent step, 2D x 1
  std::vector<Tensor> ln_gain, ln_bias;
  Tensor concat_proj;                 // K*D x D, concat-fusion ablation only
  bool shared_gate = false;

  void init_gated(std::size_t num_scales, std::size_t d_model, bool share_gate,
                  std::mt19937_64& rng) {
    shared_gate = share_gate;
    top_proj = xavier_uniform(d_model, d_model, rng);
    gate_weight.clear();
    ln_gain.clear();
    ln_bias.clear();
    std::size_t steps = num_scales > 1 ? num_scales - 1 : 0;
    std::size_t gates = share_gate && steps > 0 ? 1 : steps;
    for (std::size_t i = 0; i < gates; ++i)
      gate_weight.push_back(xavier_uniform(2 * d_model, 1, rng));
    for (std::size_t i = 0; i < steps; ++i) {
      ln_gain.push_back(Tensor({d_model}, 1.0, true));
      ln_bias.push_back(Tensor({d_model}, 0.0, true));
    }
  }

  void init_concat(std::size_t num_scales, std::size_t d_model,
                   std::mt19937_64& rng) {
    concat_proj = xavier_uniform(num_scales * d_model, d_model, rng);
  }

  void collect_gated(const std::string& prefix, std::vector<NamedParam>& out) {
    out.push_back({prefix + ".top_proj", &top_proj});
    for (std::size_t i = 0; i < gate_weight.size(); ++i)
      out.push_back({prefix + ".gate_w" + std::to_string(i), &gate_weight[i]});
    for (std::size_t i = 0; i < ln_gain.size(); ++i) {
      out.push_back({prefix + ".ln_gain" + std::to_string(i), &ln_gain[i]});
      out.push_back({prefix + ".ln_bias" + std::to_string(i), &ln_bias[i]});
    }
  }

  void collect_concat(const std::string& prefix,
                      std::vector<NamedParam>& out) {
    out.push_back({prefix + ".concat_proj", &concat_proj});
  }
};

// embeddings[k] is X_hat for scale k+1 (finest first).  Returns P^1.
inline Tensor fuse_pyramid(const std::vector<Tensor>& embeddings,
                           const FusionParams& p,
                           std::vector<GateStats>* gate_stats = nullptr) {
  if (embeddings.empty())
    throw std::invalid_argument("fuse_pyramid: no embeddings");
  std::size_t d = embeddings[0].dim(1);
  for (auto& e : embeddings)
    if (e.rank() != 2 || e.dim(1) != d)
      throw DimensionError("fuse_pyramid: embedding shape mismatch " +
                           shape_str(e.shape()));
  std::size_t num_scales = embeddings.size();
  Tensor acc = ops::matmul(embeddings[num_scales - 1], p.top_proj);
  for (std::size_t step = 0; step + 1 < num_scales; ++step) {
    std::size_t k = num_scales - 2 - step;  // descend K-1 .. 1 (0-based)
    const Tensor& fine = embeddings[k];
    const Tensor& w_a =
        p.shared_gate ? p.gate_weight[0] : p.gate_weight[k];
    Tensor alpha = ops::sigmoid(ops::matmul(ops::concat({fine, acc}, 1), w_a));
    if (gate_stats) {
      double m = 0.0, s = 0.0;
      for (double v : alpha.values()) m += v;
      m /= static_cast<double>(alpha.size());
      for (double v : alpha.values()) s += (v - m) * (v - m);
      s = std::sqrt(s / static_cast<double>(alpha.size()));
      gate_stats->push_back({m, s});
    }
    Tensor one_minus = ops::sub(Tensor(alpha.shape(), 1.0), alpha);
    Tensor mixed = ops::add(ops::col_broadcast_mul(alpha, fine),
                            ops::col_broadcast_mul(one_minus, acc));
    acc = ops::layer_norm(mixed, p.ln_gain[k], p.ln_bias[k]);
  }
  return acc;
}

// Ablation: concatenate all scales along features and project K*D -> D.
inline Tensor concat_fuse(const std::vector<Tensor>& embeddings,
                          const FusionParams& p) {
  if (embeddings.empty())
    throw std::invalid_argument("concat_fuse: no embeddings");
  Tensor cat =
      embeddings.size() == 1 ? embeddings[0] : ops::concat(embeddings, 1);
  return ops::matmul(cat, p.concat_proj);
}

}  // namespace mshgfn
