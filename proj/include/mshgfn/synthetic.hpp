#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "mshgfn/data.hpp"

namespace mshgfn {

// Synthetic OHLCV panel whose movement labels are a deterministic function of
// a two-scale moving-average crossover plus inter-stock coupling.
//
// A smooth cyclical factor is carried in the volume series.  A stock's signal
// is the MA(short) >= MA(long) crossover of that factor: leader stocks read
// their own volume, follower stocks read the mean volume of the leader group
// (their own volume is an unrelated cycle).  The next day's close then moves
// +up_return on signal 1 and -down_return on signal 0 (plus noise small
// enough never to cross the gamma=0.005 label threshold), so Eq-style
// return-threshold labels reproduce the signal exactly.
struct SyntheticConfig {
  std::size_t num_stocks = 20;  // first half leaders, second half followers
  std::size_t num_days = 600;
  std::uint64_t seed = 0;
  std::size_t ma_short = 3;
  std::size_t ma_long = 10;
  double factor_period = 40.0;
  double up_return = 0.01;
  double down_return = 0.01;  // balanced so the price path carries no drift
  double return_noise = 0.002;
};

inline StockPanel make_synthetic_panel(const SyntheticConfig& cfg) {
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::size_t n = cfg.num_stocks, t_days = cfg.num_days;
  std::size_t leaders = n / 2;

  // volume factors: leaders carry the signal cycle, followers a decoy cycle
  std::vector<double> phase(n), period(n), base_volume(n);
  for (std::size_t i = 0; i < n; ++i) {
    bool leader = i < leaders;
    period[i] = leader ? cfg.factor_period : cfg.factor_period * 0.57;
    phase[i] = (leader ? 0.0 : 2.1) + 0.25 * unit(rng);
    base_volume[i] = 1e6 * (0.5 + unit(rng));
  }
  std::vector<std::vector<double>> volume(n, std::vector<double>(t_days));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t t = 0; t < t_days; ++t) {
      double cyc = std::sin(2.0 * M_PI * static_cast<double>(t) / period[i] +
                            phase[i]);
      volume[i][t] =
          base_volume[i] * (1.0 + 0.5 * cyc) * (1.0 + 0.02 * (unit(rng) - 0.5));
    }

  // signal series per stock from the crossover of the relevant volume series
  auto ma = [&](const std::vector<double>& series, std::size_t t,
                std::size_t len) {
    std::size_t lo = t + 1 >= len ? t + 1 - len : 0;
    double s = 0.0;
    for (std::size_t u = lo; u <= t; ++u) s += series[u];
    return s / static_cast<double>(t - lo + 1);
  };
  std::vector<double> leader_mean(t_days, 0.0);
  for (std::size_t t = 0; t < t_days; ++t) {
    for (std::size_t i = 0; i < leaders; ++i) leader_mean[t] += volume[i][t];
    leader_mean[t] /= static_cast<double>(leaders);
  }
  std::vector<std::vector<int>> signal(n, std::vector<int>(t_days));
  for (std::size_t i = 0; i < n; ++i) {
    const std::vector<double>& src = i < leaders ? volume[i] : leader_mean;
    for (std::size_t t = 0; t < t_days; ++t)
      signal[i][t] =
          ma(src, t, cfg.ma_short) >= ma(src, t, cfg.ma_long) ? 1 : 0;
  }

  StockPanel panel;
  panel.dates.resize(t_days);
  for (std::size_t t = 0; t < t_days; ++t) {
    // synthetic calendar: sequential ISO dates, months of 28 days
    std::size_t day = t % 28 + 1, month = (t / 28) % 12 + 1,
                year = 2015 + t / (28 * 12);
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04zu-%02zu-%02zu", year, month, day);
    panel.dates[t] = buf;
  }
  panel.tickers.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    char buf[8];
    std::snprintf(buf, sizeof(buf), "S%03zu", i);
    panel.tickers[i] = buf;
  }
  panel.values.resize(n * t_days * kNumIndicators);

  for (std::size_t i = 0; i < n; ++i) {
    double close = 50.0 + 100.0 * unit(rng);
    for (std::size_t t = 0; t < t_days; ++t) {
      double open = t == 0 ? close
                           : close * (1.0 + 0.002 * (unit(rng) - 0.5));
      double high = std::max(open, close) * (1.0 + 0.003 * unit(rng));
      double low = std::min(open, close) * (1.0 - 0.003 * unit(rng));
      panel.at(i, t, Indicator::kOpen) = open;
      panel.at(i, t, Indicator::kHigh) = high;
      panel.at(i, t, Indicator::kLow) = low;
      panel.at(i, t, Indicator::kClose) = close;
      panel.at(i, t, Indicator::kVolume) = volume[i][t];
      if (t + 1 < t_days) {
        double noise = cfg.return_noise * (2.0 * unit(rng) - 1.0);
        double ret = signal[i][t + 1] ? cfg.up_return + noise
                                      : -cfg.down_return + noise;
        close *= 1.0 + ret;
      }
    }
  }
  return panel;
}

}  // namespace mshgfn
