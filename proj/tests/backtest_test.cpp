#include <gtest/gtest.h>

#include <cmath>

#include "mshgfn/backtest.hpp"

using namespace mshgfn;

namespace {

// closes[i][t]; open/high/low derived so the panel validates
StockPanel panel_from_closes(const std::vector<std::vector<double>>& closes) {
  StockPanel p;
  std::size_t n = closes.size(), days = closes[0].size();
  for (std::size_t i = 0; i < n; ++i)
    p.tickers.push_back("T" + std::to_string(i));
  for (std::size_t t = 0; t < days; ++t) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "2020-01-%02zu", t + 1);
    p.dates.push_back(buf);
  }
  p.values.resize(n * days * kNumIndicators);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t t = 0; t < days; ++t) {
      double c = closes[i][t];
      p.at(i, t, Indicator::kOpen) = c;
      p.at(i, t, Indicator::kHigh) = c * 1.01;
      p.at(i, t, Indicator::kLow) = c * 0.99;
      p.at(i, t, Indicator::kClose) = c;
      p.at(i, t, Indicator::kVolume) = 1000.0;
    }
  return p;
}

std::vector<DayPredictions> flat_predictions(const StockPanel& p,
                                             std::size_t days) {
  std::vector<DayPredictions> out;
  for (std::size_t t = 0; t < days; ++t) {
    DayPredictions d;
    d.date = p.dates[t];
    for (auto& ticker : p.tickers) d.prob_up[ticker] = 0.6;
    out.push_back(d);
  }
  return out;
}

TEST(SelectTopK, HighestProbabilitiesWin) {
  std::map<std::string, double> probs{
      {"A", 0.1}, {"B", 0.9}, {"C", 0.5}, {"D", 0.7}};
  auto top = select_top_k(probs, 2);
  ASSERT_EQ(top.size(), 2u);
  EXPECT_EQ(top[0], "B");
  EXPECT_EQ(top[1], "D");
}

TEST(SelectTopK, TiesBreakLexicographically) {
  std::map<std::string, double> probs{
      {"ZZ", 0.5}, {"AA", 0.5}, {"MM", 0.5}, {"BB", 0.9}};
  auto top = select_top_k(probs, 3);
  EXPECT_EQ(top[0], "BB");
  EXPECT_EQ(top[1], "AA");
  EXPECT_EQ(top[2], "MM");
}

TEST(SelectTopK, TooFewTickersRejected) {
  std::map<std::string, double> probs{{"A", 0.5}};
  EXPECT_THROW(select_top_k(probs, 2), std::invalid_argument);
}

TEST(Backtest, ConstantPricesPreserveCapitalWithoutCosts) {
  std::vector<std::vector<double>> closes(5,
                                          std::vector<double>(10, 100.0));
  StockPanel p = panel_from_closes(closes);
  BacktestConfig cfg;
  cfg.top_k = 5;
  EquityCurve curve = run_backtest(flat_predictions(p, 9), p, cfg);
  ASSERT_EQ(curve.points.size(), 10u);
  for (auto& pt : curve.points)
    EXPECT_NEAR(pt.value, cfg.initial_capital, 1e-6);
  EXPECT_DOUBLE_EQ(curve.max_drawdown(), 0.0);
}

TEST(Backtest, UniformDriftCompounds) {
  std::size_t days = 8;
  std::vector<std::vector<double>> closes(5);
  for (auto& c : closes) {
    double px = 50.0;
    for (std::size_t t = 0; t < days; ++t) {
      c.push_back(px);
      px *= 1.01;
    }
  }
  StockPanel p = panel_from_closes(closes);
  BacktestConfig cfg;
  cfg.top_k = 5;
  EquityCurve curve = run_backtest(flat_predictions(p, days - 1), p, cfg);
  double expect = cfg.initial_capital * std::pow(1.01, days - 1);
  EXPECT_NEAR(curve.final_value(), expect, expect * 1e-12);
  for (double r : curve.daily_returns()) EXPECT_NEAR(r, 0.01, 1e-12);
}

TEST(Backtest, AccountingIdentityMatchesHandComputation) {
  // two stocks held, one day: value = sum over names of (cash/k)/px * px_next
  std::vector<std::vector<double>> closes{
      {100.0, 110.0}, {50.0, 45.0}, {20.0, 20.0}};
  StockPanel p = panel_from_closes(closes);
  BacktestConfig cfg;
  cfg.initial_capital = 1000.0;
  cfg.top_k = 2;
  std::vector<DayPredictions> preds(1);
  preds[0].date = p.dates[0];
  preds[0].prob_up = {{"T0", 0.9}, {"T1", 0.8}, {"T2", 0.1}};
  EquityCurve curve = run_backtest(preds, p, cfg);
  double expect = 500.0 / 100.0 * 110.0 + 500.0 / 50.0 * 45.0;
  EXPECT_NEAR(curve.final_value(), expect, 1e-9);
}

TEST(Backtest, TransactionCostsChargePerSide) {
  std::vector<std::vector<double>> closes(2, std::vector<double>(3, 100.0));
  StockPanel p = panel_from_closes(closes);
  BacktestConfig cfg;
  cfg.initial_capital = 1'000'000.0;
  cfg.top_k = 2;
  cfg.cost_bps = 10.0;  // 0.1% per side
  EquityCurve curve = run_backtest(flat_predictions(p, 1), p, cfg);
  // flat prices: traded notional is 2x capital (buy and sell legs)
  double expect = cfg.initial_capital * (1.0 - 2.0 * 10.0 / 10'000.0);
  EXPECT_NEAR(curve.points[1].value, expect, 1e-6);
}

TEST(Backtest, ForesightBeatsAntiForesight) {
  std::size_t days = 6;
  std::vector<std::vector<double>> closes(4);
  // stocks 0,1 rise 2% per day; stocks 2,3 fall 1% per day
  for (std::size_t i = 0; i < 4; ++i) {
    double px = 100.0;
    for (std::size_t t = 0; t < days; ++t) {
      closes[i].push_back(px);
      px *= i < 2 ? 1.02 : 0.99;
    }
  }
  StockPanel p = panel_from_closes(closes);
  auto preds_for = [&](bool smart) {
    std::vector<DayPredictions> out;
    for (std::size_t t = 0; t + 1 < days; ++t) {
      DayPredictions d;
      d.date = p.dates[t];
      for (std::size_t i = 0; i < 4; ++i)
        d.prob_up[p.tickers[i]] = (i < 2) == smart ? 0.9 : 0.1;
      out.push_back(d);
    }
    return out;
  };
  BacktestConfig cfg;
  cfg.top_k = 2;
  double smart = run_backtest(preds_for(true), p, cfg).final_value();
  double dumb = run_backtest(preds_for(false), p, cfg).final_value();
  EXPECT_NEAR(smart, cfg.initial_capital * std::pow(1.02, days - 1),
              smart * 1e-12);
  EXPECT_NEAR(dumb, cfg.initial_capital * std::pow(0.99, days - 1),
              dumb * 1e-9);
  EXPECT_GT(smart, dumb);
}

TEST(Backtest, MaxDrawdownAndReturnsOracle) {
  EquityCurve curve;
  for (double v : {100.0, 120.0, 90.0, 110.0, 80.0})
    curve.points.push_back({"d", v});
  EXPECT_NEAR(curve.max_drawdown(), (120.0 - 80.0) / 120.0, 1e-12);
  auto r = curve.daily_returns();
  ASSERT_EQ(r.size(), 4u);
  EXPECT_NEAR(r[0], 0.2, 1e-12);
  EXPECT_NEAR(r[1], 90.0 / 120.0 - 1.0, 1e-12);
  EXPECT_DOUBLE_EQ(curve.final_value(), 80.0);
}

TEST(Backtest, MisalignedDatesRejected) {
  std::vector<std::vector<double>> closes(2, std::vector<double>(4, 100.0));
  StockPanel p = panel_from_closes(closes);
  BacktestConfig cfg;
  cfg.top_k = 2;
  std::vector<DayPredictions> bad_date(1);
  bad_date[0].date = "1999-01-01";
  bad_date[0].prob_up = {{"T0", 0.5}, {"T1", 0.5}};
  EXPECT_THROW(run_backtest(bad_date, p, cfg), DataError);

  std::vector<DayPredictions> last_day(1);
  last_day[0].date = p.dates.back();  // no next close to mark against
  last_day[0].prob_up = {{"T0", 0.5}, {"T1", 0.5}};
  EXPECT_THROW(run_backtest(last_day, p, cfg), DataError);

  std::vector<DayPredictions> bad_ticker(1);
  bad_ticker[0].date = p.dates[0];
  bad_ticker[0].prob_up = {{"X0", 0.5}, {"X1", 0.5}};
  EXPECT_THROW(run_backtest(bad_ticker, p, cfg), DataError);
}

}  // namespace
