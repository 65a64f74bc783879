#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "mshgfn/data.hpp"

namespace mshgfn {

struct BacktestConfig {
  double initial_capital = 10'000'000.0;
  std::size_t top_k = 5;
  double cost_bps = 0.0;  // per side, applied to traded notional
};

struct EquityPoint {
  std::string date;
  double value = 0.0;
};

struct EquityCurve {
  std::vector<EquityPoint> points;

  double final_value() const {
    return points.empty() ? 0.0 : points.back().value;
  }
  double max_drawdown() const {
    double peak = 0.0, worst = 0.0;
    for (auto& p : points) {
      peak = std::max(peak, p.value);
      if (peak > 0.0) worst = std::max(worst, (peak - p.value) / peak);
    }
    return worst;
  }
  std::vector<double> daily_returns() const {
    std::vector<double> r;
    for (std::size_t i = 1; i < points.size(); ++i)
      r.push_back(points[i].value / points[i - 1].value - 1.0);
    return r;
  }
};

// k tickers with the highest predicted up-probability; ties break by
// lexicographic ticker order.
inline std::vector<std::string> select_top_k(
    const std::map<std::string, double>& prob_up, std::size_t k) {
  if (prob_up.size() < k)
    throw std::invalid_argument("select_top_k: only " +
                                std::to_string(prob_up.size()) +
                                " tickers for k=" + std::to_string(k));
  std::vector<std::pair<std::string, double>> items(prob_up.begin(),
                                                    prob_up.end());
  std::stable_sort(items.begin(), items.end(),
                   [](const auto& a, const auto& b) {
                     if (a.second != b.second) return a.second > b.second;
                     return a.first < b.first;
                   });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < k; ++i) out.push_back(items[i].first);
  return out;
}

// One day's predictions, keyed by the anchor date (the portfolio formed at
// that day's close is held through the next close).
struct DayPredictions {
  std::string date;
  std::map<std::string, double> prob_up;
};

// Daily full rebalance: liquidate at close, buy the top-k equally weighted
// with fractional shares, mark to market at the next close.
inline EquityCurve run_backtest(const std::vector<DayPredictions>& predictions,
                                const StockPanel& panel,
                                const BacktestConfig& cfg) {
  std::map<std::string, std::size_t> ticker_index;
  for (std::size_t i = 0; i < panel.num_stocks(); ++i)
    ticker_index[panel.tickers[i]] = i;
  std::map<std::string, std::size_t> date_index;
  for (std::size_t t = 0; t < panel.num_days(); ++t)
    date_index[panel.dates[t]] = t;

  EquityCurve curve;
  double cash = cfg.initial_capital;
  curve.points.push_back({predictions.empty() ? "" : predictions.front().date,
                          cash});
  for (auto& day : predictions) {
    auto it = date_index.find(day.date);
    if (it == date_index.end())
      throw DataError("backtest: prediction date " + day.date +
                      " not in panel");
    std::size_t t = it->second;
    if (t + 1 >= panel.num_days())
      throw DataError("backtest: no next trading day after " + day.date);
    auto held = select_top_k(day.prob_up, cfg.top_k);
    double per_name = cash / static_cast<double>(cfg.top_k);
    double cost_rate = cfg.cost_bps / 10'000.0;
    double value_next = 0.0;
    double traded_notional = 0.0;
    for (auto& ticker : held) {
      auto ti = ticker_index.find(ticker);
      if (ti == ticker_index.end())
        throw DataError("backtest: ticker " + ticker + " not in panel");
      double px = panel.close(ti->second, t);
      double px_next = panel.close(ti->second, t + 1);
      double shares = per_name / px;
      value_next += shares * px_next;
      traded_notional += per_name + shares * px_next;  // buy then sell
    }
    cash = value_next - traded_notional * cost_rate;
    curve.points.push_back({panel.dates[t + 1], cash});
  }
  return curve;
}

}  // namespace mshgfn
