#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "mshgfn/adam.hpp"
#include "mshgfn/evaluate.hpp"
#include "mshgfn/model.hpp"

namespace mshgfn {

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  double learning_rate = 1e-4;
  std::size_t batch_size = 32;
  std::size_t epochs = 50;
  std::uint64_t seed = 0;
  double grad_clip = 0.0;       // 0 disables clipping
  double early_stop_acc = 0.0;  // stop once val ACC reaches this; 0 disables
  ModelConfig model;
  LabelMode label_mode = LabelMode::kReturnThreshold;
  double gamma = 0.005;
};

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_acc = 0.0;
  double val_mcc = 0.0;
  std::vector<GateStats> gate_stats;  // last batch of the epoch
};

struct FitResult {
  std::vector<EpochLog> history;
  std::size_t best_epoch = 0;  // 1-based; 0 means no epochs ran
  double best_val_acc = 0.0;
};

namespace detail {

inline std::vector<std::vector<double>> snapshot(
    const std::vector<NamedParam>& params) {
  std::vector<std::vector<double>> out;
  for (auto& p : params) out.push_back(p.tensor->values());
  return out;
}

inline void restore(std::vector<NamedParam>& params,
                    const std::vector<std::vector<double>>& snap) {
  for (std::size_t i = 0; i < params.size(); ++i)
    params[i].tensor->values() = snap[i];
}

}  // namespace detail

// Trains `params` in place; on return they hold the best-validation-ACC
// epoch's values.  Each batch averages the cross-entropy of `batch_size`
// whole windows (every window carries all N stocks).
inline FitResult fit(ModelParams& params, const TrainConfig& cfg,
                     const std::vector<WindowSample>& train_samples,
                     const std::vector<WindowSample>& val_samples) {
  if (train_samples.empty() || val_samples.empty())
    throw DataError("fit: empty training or validation split");
  std::mt19937_64 rng(cfg.seed);
  auto named = params.named(cfg.model);
  AdamState adam;
  adam.init(named);
  FitResult result;
  auto best = detail::snapshot(named);
  std::vector<std::size_t> order(train_samples.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    std::size_t num_batches = 0;
    EpochLog log;
    for (std::size_t start = 0; start < order.size();
         start += cfg.batch_size) {
      std::size_t end = std::min(order.size(), start + cfg.batch_size);
      params.zero_grads(cfg.model);
      std::vector<Tensor> losses;
      log.gate_stats.clear();
      for (std::size_t s = start; s < end; ++s) {
        const WindowSample& sample = train_samples[order[s]];
        ForwardDiagnostics diag;
        ForwardResult res =
            forward_window(params, cfg.model, sample.window, /*training=*/true,
                           rng, &sample.labels, &diag);
        losses.push_back(res.loss);
        log.gate_stats = diag.gate_stats;
      }
      Tensor batch_loss = losses[0];
      for (std::size_t i = 1; i < losses.size(); ++i)
        batch_loss = ops::add(batch_loss, losses[i]);
      batch_loss = ops::scale(batch_loss, 1.0 / losses.size());
      double loss_val = batch_loss.at(0);
      if (!std::isfinite(loss_val))
        throw NumericError("NaN loss at epoch " + std::to_string(epoch) +
                           ", batch " + std::to_string(num_batches + 1));
      batch_loss.backward();
      if (cfg.grad_clip > 0.0) {
        double sq = 0.0;
        for (auto& p : named)
          for (double g : p.tensor->grad()) sq += g * g;
        double norm = std::sqrt(sq);
        if (norm > cfg.grad_clip) {
          double f = cfg.grad_clip / norm;
          for (auto& p : named)
            for (auto& g : p.tensor->grad()) g *= f;
        }
      }
      for (auto& p : named)
        for (double g : p.tensor->grad())
          if (!std::isfinite(g))
            throw NumericError("non-finite gradient in " + p.name +
                               " at epoch " + std::to_string(epoch));
      adam_step(named, adam, cfg.learning_rate);
      epoch_loss += loss_val;
      ++num_batches;
    }
    Metrics val = evaluate(params, cfg.model, val_samples);
    log.epoch = epoch;
    log.train_loss = epoch_loss / static_cast<double>(num_batches);
    log.val_acc = val.acc;
    log.val_mcc = val.mcc;
    result.history.push_back(log);
    if (result.best_epoch == 0 || val.acc > result.best_val_acc) {
      result.best_epoch = epoch;
      result.best_val_acc = val.acc;
      best = detail::snapshot(named);
    }
    if (cfg.early_stop_acc > 0.0 && result.best_val_acc >= cfg.early_stop_acc)
      break;
  }
  detail::restore(named, best);
  return result;
}

}  // namespace mshgfn
