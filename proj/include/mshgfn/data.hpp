#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mshgfn/tensor.hpp"

namespace mshgfn {

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

constexpr std::size_t kNumIndicators = 5;  // open, high, low, close, volume

enum class Indicator : std::size_t {
  kOpen = 0,
  kHigh = 1,
  kLow = 2,
  kClose = 3,
  kVolume = 4
};

// Aligned OHLCV matrix: every ticker covers every date.
struct StockPanel {
  std::vector<std::string> tickers;  // N
  std::vector<std::string> dates;    // T, strictly increasing ISO-8601
  std::vector<double> values;        // N x T x 5, row-major

  std::size_t num_stocks() const { return tickers.size(); }
  std::size_t num_days() const { return dates.size(); }

  double& at(std::size_t stock, std::size_t day, Indicator ind) {
    return values[(stock * dates.size() + day) * kNumIndicators +
                  static_cast<std::size_t>(ind)];
  }
  double at(std::size_t stock, std::size_t day, Indicator ind) const {
    return values[(stock * dates.size() + day) * kNumIndicators +
                  static_cast<std::size_t>(ind)];
  }
  double close(std::size_t stock, std::size_t day) const {
    return at(stock, day, Indicator::kClose);
  }
};

struct LoadReport {
  std::vector<std::string> dropped_tickers;  // incomplete coverage
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

inline double parse_number(const std::string& s, std::size_t line_no,
                           const char* what) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError("line " + std::to_string(line_no) + ": bad " + what +
                     " value '" + s + "'");
  }
}

}  // namespace detail

inline void validate_ohlcv(double open, double high, double low, double close,
                           double volume, std::size_t line_no) {
  if (open <= 0 || high <= 0 || low <= 0 || close <= 0)
    throw ParseError("line " + std::to_string(line_no) +
                     ": non-positive price");
  if (volume < 0)
    throw ParseError("line " + std::to_string(line_no) + ": negative volume");
  if (high < std::max(open, close) || low > std::min(open, close))
    throw ParseError("line " + std::to_string(line_no) +
                     ": OHLC ordering violated");
}

// CSV schema: date,ticker,open,high,low,close,volume (header required).
// Tickers that do not cover every date in the panel's date range are dropped
// and reported.
inline StockPanel load_panel(std::istream& in, LoadReport* report = nullptr) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw ParseError("empty input");
  ++line_no;
  struct Row {
    double v[kNumIndicators];
  };
  std::map<std::string, std::map<std::string, Row>> by_ticker;  // ticker->date
  std::set<std::string> all_dates;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto f = detail::split_csv_line(line);
    if (f.size() != 7)
      throw ParseError("line " + std::to_string(line_no) + ": expected 7 " +
                       "fields, got " + std::to_string(f.size()));
    double open = detail::parse_number(f[2], line_no, "open");
    double high = detail::parse_number(f[3], line_no, "high");
    double low = detail::parse_number(f[4], line_no, "low");
    double close = detail::parse_number(f[5], line_no, "close");
    double volume = detail::parse_number(f[6], line_no, "volume");
    validate_ohlcv(open, high, low, close, volume, line_no);
    by_ticker[f[1]][f[0]] = Row{{open, high, low, close, volume}};
    all_dates.insert(f[0]);
  }
  if (all_dates.empty()) throw DataError("no data rows");

  StockPanel panel;
  panel.dates.assign(all_dates.begin(), all_dates.end());
  for (auto& [ticker, rows] : by_ticker) {
    bool complete = rows.size() == panel.dates.size();
    if (complete)
      panel.tickers.push_back(ticker);
    else if (report)
      report->dropped_tickers.push_back(ticker);
  }
  if (panel.tickers.empty())
    throw DataError("no ticker covers the full date range");
  panel.values.resize(panel.num_stocks() * panel.num_days() * kNumIndicators);
  for (std::size_t i = 0; i < panel.num_stocks(); ++i) {
    auto& rows = by_ticker[panel.tickers[i]];
    for (std::size_t t = 0; t < panel.num_days(); ++t) {
      const Row& r = rows[panel.dates[t]];
      for (std::size_t k = 0; k < kNumIndicators; ++k)
        panel.values[(i * panel.num_days() + t) * kNumIndicators + k] = r.v[k];
    }
  }
  return panel;
}

inline StockPanel load_panel_file(const std::string& path,
                                  LoadReport* report = nullptr) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  return load_panel(in, report);
}

inline void save_panel(const StockPanel& panel, std::ostream& out) {
  out << "date,ticker,open,high,low,close,volume\n";
  out.precision(17);
  for (std::size_t t = 0; t < panel.num_days(); ++t)
    for (std::size_t i = 0; i < panel.num_stocks(); ++i) {
      out << panel.dates[t] << ',' << panel.tickers[i];
      for (std::size_t k = 0; k < kNumIndicators; ++k)
        out << ',' << panel.values[(i * panel.num_days() + t) *
                                       kNumIndicators +
                                   k];
      out << '\n';
    }
}

inline void save_panel_file(const StockPanel& panel, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open " + path + " for writing");
  save_panel(panel, out);
}

enum class LabelMode { kReturnThreshold, kCloseVsOpen };

// labels[i][t] is the movement label for day t+1 (t in [0, T-2]).
// kReturnThreshold: 1 iff (close[t+1]-close[t])/close[t] >= gamma.
// kCloseVsOpen:     1 iff close[t+1] > open[t+1].
inline std::vector<std::vector<int>> make_labels(
    const StockPanel& panel, double gamma,
    LabelMode mode = LabelMode::kReturnThreshold) {
  std::size_t n = panel.num_stocks(), t_days = panel.num_days();
  std::vector<std::vector<int>> labels(n, std::vector<int>(t_days - 1, 0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t t = 0; t + 1 < t_days; ++t) {
      if (mode == LabelMode::kReturnThreshold) {
        double ret =
            (panel.close(i, t + 1) - panel.close(i, t)) / panel.close(i, t);
        labels[i][t] = ret >= gamma ? 1 : 0;
      } else {
        labels[i][t] = panel.close(i, t + 1) >
                               panel.at(i, t + 1, Indicator::kOpen)
                           ? 1
                           : 0;
      }
    }
  return labels;
}

// Per-stock, per-indicator mean/std fitted on [train_begin, train_end) days.
struct NormStats {
  std::size_t num_stocks = 0;
  std::vector<double> mean;  // N x 5
  std::vector<double> stdev;

  double m(std::size_t i, std::size_t k) const {
    return mean[i * kNumIndicators + k];
  }
  double s(std::size_t i, std::size_t k) const {
    return stdev[i * kNumIndicators + k];
  }
};

inline NormStats fit_norm_stats(const StockPanel& panel,
                                std::size_t train_begin,
                                std::size_t train_end) {
  if (train_end <= train_begin || train_end > panel.num_days())
    throw DataError("invalid training range for normalization stats");
  NormStats st;
  st.num_stocks = panel.num_stocks();
  st.mean.assign(st.num_stocks * kNumIndicators, 0.0);
  st.stdev.assign(st.num_stocks * kNumIndicators, 0.0);
  double count = static_cast<double>(train_end - train_begin);
  for (std::size_t i = 0; i < st.num_stocks; ++i)
    for (std::size_t k = 0; k < kNumIndicators; ++k) {
      double mu = 0.0;
      for (std::size_t t = train_begin; t < train_end; ++t)
        mu += panel.at(i, t, static_cast<Indicator>(k));
      mu /= count;
      double var = 0.0;
      for (std::size_t t = train_begin; t < train_end; ++t) {
        double d = panel.at(i, t, static_cast<Indicator>(k)) - mu;
        var += d * d;
      }
      st.mean[i * kNumIndicators + k] = mu;
      st.stdev[i * kNumIndicators + k] = std::sqrt(var / count);
    }
  return st;
}

inline StockPanel apply_zscore(const StockPanel& panel, const NormStats& st) {
  StockPanel out = panel;
  for (std::size_t i = 0; i < panel.num_stocks(); ++i)
    for (std::size_t t = 0; t < panel.num_days(); ++t)
      for (std::size_t k = 0; k < kNumIndicators; ++k)
        out.at(i, t, static_cast<Indicator>(k)) =
            (panel.at(i, t, static_cast<Indicator>(k)) -
             st.m(i, k)) /
            std::max(st.s(i, k), 1e-8);
  return out;
}

// One training example: normalized indicator window ending at day t plus the
// movement labels for day t+1.
struct WindowSample {
  Tensor window;            // N x L x 5
  std::vector<int> labels;  // N
  std::string anchor_date;  // date of day t
  std::size_t anchor_day = 0;
};

inline std::vector<WindowSample> make_windows(
    const StockPanel& normalized, const std::vector<std::vector<int>>& labels,
    std::size_t window_len) {
  std::size_t n = normalized.num_stocks(), t_days = normalized.num_days();
  if (t_days <= window_len)
    throw DataError("panel has " + std::to_string(t_days) +
                    " days, need more than window length " +
                    std::to_string(window_len));
  std::vector<WindowSample> out;
  for (std::size_t m = 0; m + window_len < t_days; ++m) {
    WindowSample s;
    s.window = Tensor({n, window_len, kNumIndicators});
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t u = 0; u < window_len; ++u)
        for (std::size_t k = 0; k < kNumIndicators; ++k)
          s.window.at3(i, u, k) =
              normalized.at(i, m + u, static_cast<Indicator>(k));
    s.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) s.labels[i] = labels[i][m + window_len - 1];
    s.anchor_day = m + window_len - 1;
    s.anchor_date = normalized.dates[s.anchor_day];
    out.push_back(std::move(s));
  }
  return out;
}

struct SplitIndices {
  std::size_t train_end = 0;  // [0, train_end)
  std::size_t val_end = 0;    // [train_end, val_end); test = [val_end, total)
  std::size_t total = 0;
};

// Contiguous chronological split; sizes by floor, remainder to test.
inline SplitIndices chronological_split(std::size_t num_samples,
                                        double train_frac, double val_frac,
                                        double test_frac) {
  if (std::abs(train_frac + val_frac + test_frac - 1.0) > 1e-9)
    throw std::invalid_argument("split fractions must sum to 1");
  SplitIndices s;
  s.total = num_samples;
  s.train_end = static_cast<std::size_t>(num_samples * train_frac);
  s.val_end =
      s.train_end + static_cast<std::size_t>(num_samples * val_frac);
  if (s.train_end == 0 || s.val_end == s.train_end || s.val_end == s.total)
    throw DataError("split produced an empty partition (" +
                    std::to_string(num_samples) + " samples)");
  return s;
}

// FNV-1a, used for manifest content digests.
inline std::uint64_t fnv1a_digest(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace mshgfn
