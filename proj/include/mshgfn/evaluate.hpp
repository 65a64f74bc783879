#pragma once

#include <map>
#include <string>
#include <vector>

#include "mshgfn/metrics.hpp"
#include "mshgfn/model.hpp"

namespace mshgfn {

struct PredictionRow {
  std::string date;
  std::string ticker;
  double prob_up = 0.0;
  int pred = 0;
  int label = 0;
};

// Runs the model in eval mode over every sample and pools all (stock, day)
// pairs.  Decision rule: argmax, i.e. prob_up >= 0.5.
inline Metrics evaluate(ModelParams& params, const ModelConfig& cfg,
                        const std::vector<WindowSample>& samples,
                        const std::vector<std::string>* tickers = nullptr,
                        std::vector<PredictionRow>* rows = nullptr) {
  std::vector<int> preds, labels;
  std::mt19937_64 rng(0);  // unused in eval mode
  for (auto& s : samples) {
    ForwardResult res =
        forward_window(params, cfg, s.window, /*training=*/false, rng);
    for (std::size_t i = 0; i < s.labels.size(); ++i) {
      double prob_up = res.probs.at2(i, 1);
      int pred = prob_up >= 0.5 ? 1 : 0;
      preds.push_back(pred);
      labels.push_back(s.labels[i]);
      if (rows) {
        PredictionRow r;
        r.date = s.anchor_date;
        r.ticker = tickers ? (*tickers)[i] : "S" + std::to_string(i);
        r.prob_up = prob_up;
        r.pred = pred;
        r.label = s.labels[i];
        rows->push_back(r);
      }
    }
  }
  return confusion_metrics(preds, labels);
}

}  // namespace mshgfn
