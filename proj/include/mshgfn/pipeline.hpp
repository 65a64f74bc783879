#pragma once

#include <vector>

#include "mshgfn/data.hpp"
#include "mshgfn/train.hpp"

namespace mshgfn {

// Panel -> labels -> train-range z-score -> windows -> chronological split.
struct Dataset {
  NormStats stats;
  std::vector<WindowSample> train, val, test;
  std::vector<std::string> tickers;
};

inline Dataset prepare_dataset(const StockPanel& panel, const TrainConfig& cfg,
                               double train_frac = 0.75,
                               double val_frac = 0.125,
                               double test_frac = 0.125) {
  std::size_t window_len = cfg.model.window_len;
  if (panel.num_days() <= window_len)
    throw DataError("panel too short for window length " +
                    std::to_string(window_len));
  std::size_t num_samples = panel.num_days() - window_len;
  SplitIndices split =
      chronological_split(num_samples, train_frac, val_frac, test_frac);
  // days covered by training windows only
  std::size_t train_day_end = split.train_end - 1 + window_len;
  Dataset ds;
  ds.tickers = panel.tickers;
  ds.stats = fit_norm_stats(panel, 0, train_day_end);
  StockPanel normalized = apply_zscore(panel, ds.stats);
  auto labels = make_labels(panel, cfg.gamma, cfg.label_mode);
  auto samples = make_windows(normalized, labels, window_len);
  ds.train.assign(samples.begin(), samples.begin() + split.train_end);
  ds.val.assign(samples.begin() + split.train_end,
                samples.begin() + split.val_end);
  ds.test.assign(samples.begin() + split.val_end, samples.end());
  return ds;
}

// Rebuilds eval-time samples with previously fitted stats (checkpoint path).
inline Dataset prepare_dataset_with_stats(const StockPanel& panel,
                                          const TrainConfig& cfg,
                                          const NormStats& stats) {
  std::size_t window_len = cfg.model.window_len;
  if (panel.num_days() <= window_len)
    throw DataError("panel too short for window length " +
                    std::to_string(window_len));
  std::size_t num_samples = panel.num_days() - window_len;
  SplitIndices split = chronological_split(num_samples, 0.75, 0.125, 0.125);
  Dataset ds;
  ds.tickers = panel.tickers;
  ds.stats = stats;
  StockPanel normalized = apply_zscore(panel, stats);
  auto labels = make_labels(panel, cfg.gamma, cfg.label_mode);
  auto samples = make_windows(normalized, labels, window_len);
  ds.train.assign(samples.begin(), samples.begin() + split.train_end);
  ds.val.assign(samples.begin() + split.train_end,
                samples.begin() + split.val_end);
  ds.test.assign(samples.begin() + split.val_end, samples.end());
  return ds;
}

}  // namespace mshgfn
