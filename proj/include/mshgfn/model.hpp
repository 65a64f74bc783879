#pragma once

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mshgfn/data.hpp"
#include "mshgfn/fusion.hpp"
#include "mshgfn/gnn.hpp"
#include "mshgfn/predictor.hpp"
#include "mshgfn/pyramid.hpp"
#include "mshgfn/temporal.hpp"

namespace mshgfn {

enum class Ablation { kNone, kNoFeaturesSr, kConcatFusion, kLstmTemporal };

inline const char* ablation_name(Ablation a) {
  switch (a) {
    case Ablation::kNone: return "none";
    case Ablation::kNoFeaturesSr: return "no_features_sr";
    case Ablation::kConcatFusion: return "concat_fusion";
    case Ablation::kLstmTemporal: return "lstm_temporal";
  }
  return "?";
}

inline Ablation parse_ablation(const std::string& s) {
  if (s == "none") return Ablation::kNone;
  if (s == "no_features_sr") return Ablation::kNoFeaturesSr;
  if (s == "concat_fusion") return Ablation::kConcatFusion;
  if (s == "lstm_temporal") return Ablation::kLstmTemporal;
  throw std::invalid_argument("unknown ablation '" + s + "'");
}

struct ModelConfig {
  std::size_t num_stocks = 0;
  std::size_t window_len = 16;    // L
  std::size_t num_scales = 3;     // K
  std::size_t embed_dim = 0;      // 0 keeps the literal indicator dimension
  std::size_t heads = 1;          // must divide the model dimension
  std::size_t attr_rank = 8;      // h in the adaptive matrices
  bool share_attr_matrices = false;
  bool share_gate_weights = false;
  bool time_mean_pool = false;
  double dropout = 0.5;
  Ablation ablation = Ablation::kNone;

  std::size_t model_dim() const {
    return embed_dim == 0 ? kNumIndicators : embed_dim;
  }
  std::size_t scale_len(std::size_t k) const {  // k is 0-based
    std::size_t len = window_len;
    for (std::size_t i = 0; i < k; ++i) len = (len + 1) / 2;
    return len;
  }
};

// Every learnable tensor of the model, grouped per scale and submodule.
// Only the groups used by the active ablation are allocated.
struct ModelParams {
  std::vector<TemporalEncoderParams> temporal;  // per scale
  std::vector<LstmParams> lstm;                 // per scale (lstm ablation)
  std::vector<GraphScaleParams> graph;          // per scale
  FusionParams fusion;
  PredictorParams predictor;

  void init(const ModelConfig& cfg, std::mt19937_64& rng) {
    std::size_t d = cfg.model_dim();
    temporal.clear();
    lstm.clear();
    graph.clear();
    for (std::size_t k = 0; k < cfg.num_scales; ++k) {
      if (cfg.ablation == Ablation::kLstmTemporal) {
        lstm.emplace_back();
        lstm.back().init(kNumIndicators, d, rng);
      } else {
        temporal.emplace_back();
        temporal.back().init(kNumIndicators, d, cfg.heads, rng);
      }
      graph.emplace_back();
      graph.back().init(cfg.num_stocks, kNumIndicators, cfg.attr_rank,
                        cfg.scale_len(k), d, cfg.share_attr_matrices, rng);
      if (cfg.ablation == Ablation::kNoFeaturesSr) {
        // identity adjacency path: the attribute-graph tensors are unused
        graph.back().e1.clear();
        graph.back().e2.clear();
        graph.back().attr_weight = Tensor();
      }
    }
    if (cfg.ablation == Ablation::kConcatFusion)
      fusion.init_concat(cfg.num_scales, d, rng);
    else
      fusion.init_gated(cfg.num_scales, d, cfg.share_gate_weights, rng);
    predictor.init(d, rng);
  }

  std::vector<NamedParam> named(const ModelConfig& cfg) {
    std::vector<NamedParam> out;
    for (std::size_t k = 0; k < cfg.num_scales; ++k) {
      std::string sk = "scale" + std::to_string(k + 1);
      if (cfg.ablation == Ablation::kLstmTemporal)
        lstm[k].collect(sk + ".lstm", out);
      else
        temporal[k].collect(sk + ".temporal", out);
      graph[k].collect(sk + ".graph", out,
                       cfg.ablation != Ablation::kNoFeaturesSr);
    }
    if (cfg.ablation == Ablation::kConcatFusion)
      fusion.collect_concat("fusion", out);
    else
      fusion.collect_gated("fusion", out);
    predictor.collect("predictor", out);
    return out;
  }

  void zero_grads(const ModelConfig& cfg) {
    for (auto& np : named(cfg)) np.tensor->zero_grad();
  }
};

struct ForwardDiagnostics {
  std::vector<Tensor> raw_adjacency;     // per scale, Eq-9 style raw A
  std::vector<Tensor> norm_adjacency;    // per scale, propagation matrix
  std::vector<Tensor> scale_embeddings;  // per scale, X_hat
  std::vector<Tensor> pyramid;
  std::vector<GateStats> gate_stats;
};

struct ForwardResult {
  Tensor probs;  // N x 2
  Tensor loss;   // scalar, only when labels given
};

// End-to-end forward pass over one window (all N stocks jointly).
inline ForwardResult forward_window(ModelParams& params,
                                    const ModelConfig& cfg,
                                    const Tensor& window, bool training,
                                    std::mt19937_64& rng,
                                    const std::vector<int>* labels = nullptr,
                                    ForwardDiagnostics* diag = nullptr) {
  std::vector<Tensor> pyramid = build_pyramid(window, cfg.num_scales);
  if (diag) diag->pyramid = pyramid;
  std::vector<Tensor> embeddings;
  for (std::size_t k = 0; k < cfg.num_scales; ++k) {
    Tensor z = cfg.ablation == Ablation::kLstmTemporal
                   ? lstm_encode_scale(pyramid[k], params.lstm[k])
                   : encode_scale(pyramid[k], params.temporal[k], cfg.dropout,
                                  training, rng, cfg.time_mean_pool);
    Tensor x_hat;
    if (cfg.ablation == Ablation::kNoFeaturesSr) {
      Tensor ident = Tensor::identity(z.dim(0));
      x_hat = propagate(ident, z, params.graph[k].prop_weight, cfg.dropout,
                        training, rng);
      if (diag) diag->norm_adjacency.push_back(ident);
    } else {
      Tensor a_raw = stock_adjacency_for_scale(params.graph[k], pyramid[k]);
      Tensor a_hat = normalize_adjacency(a_raw);
      x_hat = propagate(a_hat, z, params.graph[k].prop_weight, cfg.dropout,
                        training, rng);
      if (diag) {
        diag->raw_adjacency.push_back(a_raw);
        diag->norm_adjacency.push_back(a_hat);
      }
    }
    embeddings.push_back(x_hat);
  }
  if (diag) diag->scale_embeddings = embeddings;
  Tensor fused = cfg.ablation == Ablation::kConcatFusion
                     ? concat_fuse(embeddings, params.fusion)
                     : fuse_pyramid(embeddings, params.fusion,
                                    diag ? &diag->gate_stats : nullptr);
  Tensor logits =
      predict_logits(fused, params.predictor, cfg.dropout, training, rng);
  ForwardResult res;
  res.probs = ops::softmax(logits, 1);
  if (labels) res.loss = ops::cross_entropy(logits, *labels);
  return res;
}

}  // namespace mshgfn
