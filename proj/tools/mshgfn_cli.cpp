// Batch front door: ingest, train, eval, backtest, ablate, scales, gradcheck.
// Exit codes: 0 success, 1 usage, 2 data error, 3 numeric failure.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "mshgfn/backtest.hpp"
#include "mshgfn/checkpoint.hpp"
#include "mshgfn/evaluate.hpp"
#include "mshgfn/model_gradcheck.hpp"
#include "mshgfn/pipeline.hpp"
#include "mshgfn/synthetic.hpp"
#include "mshgfn/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mshgfn;

namespace {

constexpr const char* kVersion = "0.1.0";

// Relative data paths fall back to $MSHGFN_DATA_DIR.
std::string resolve_data_path(const std::string& path) {
  if (fs::exists(path) || fs::path(path).is_absolute()) return path;
  if (const char* dir = std::getenv("MSHGFN_DATA_DIR")) {
    fs::path candidate = fs::path(dir) / path;
    if (fs::exists(candidate)) return candidate.string();
  }
  return path;
}

std::string file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  char buf[32];
  std::snprintf(buf, sizeof(buf), "fnv1a:%016llx",
                static_cast<unsigned long long>(fnv1a_digest(ss.str())));
  return buf;
}

struct Manifest {
  json config = json::object();
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> inputs;   // path, digest
  std::vector<std::string> outputs;

  void write(const std::string& primary_output) const {
    json j;
    j["version"] = kVersion;
    j["config"] = config;
    j["seed"] = seed;
    json in = json::array();
    for (auto& [path, digest] : inputs)
      in.push_back(json{{"path", path}, {"digest", digest}});
    j["inputs"] = in;
    json out = json::array();
    for (auto& path : outputs)
      out.push_back(json{{"path", path}, {"digest", file_digest(path)}});
    j["outputs"] = out;
    std::ofstream f(primary_output + ".manifest.json");
    f << j.dump(2) << "\n";
  }
};

TrainConfig load_train_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("config " + path + ": " + e.what());
  }
  return train_config_from_json(j);
}

void write_metrics_csv(const std::string& path, const std::string& dataset,
                       const std::vector<std::pair<std::string, Metrics>>&
                           rows) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open " + path + " for writing");
  out << "dataset,variant,acc,mcc\n";
  out.precision(12);
  for (auto& [variant, m] : rows)
    out << dataset << ',' << variant << ',' << m.acc << ',' << m.mcc << '\n';
}

void write_train_log(const std::string& path, const FitResult& fit_result) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open " + path + " for writing");
  std::size_t gates = fit_result.history.empty()
                          ? 0
                          : fit_result.history.front().gate_stats.size();
  out << "epoch,train_loss,val_acc,val_mcc";
  for (std::size_t g = 0; g < gates; ++g)
    out << ",gate" << g + 1 << "_mean,gate" << g + 1 << "_std";
  out << "\n";
  out.precision(17);
  for (auto& e : fit_result.history) {
    out << e.epoch << ',' << e.train_loss << ',' << e.val_acc << ','
        << e.val_mcc;
    for (auto& gs : e.gate_stats) out << ',' << gs.mean << ',' << gs.stdev;
    out << "\n";
  }
}

std::string dataset_name(const std::string& data_path) {
  return fs::path(data_path).stem().string();
}

// Runs one training job end to end; returns the fit result and leaves the
// trained parameters in `params`.
FitResult train_once(const StockPanel& panel, TrainConfig& cfg,
                     ModelParams& params, Dataset& ds) {
  cfg.model.num_stocks = panel.num_stocks();
  ds = prepare_dataset(panel, cfg);
  std::mt19937_64 rng(cfg.seed);
  params.init(cfg.model, rng);
  if (cfg.epochs == 0) return FitResult{};
  return fit(params, cfg, ds.train, ds.val);
}

int cmd_ingest(const std::string& data, const std::string& out) {
  LoadReport report;
  StockPanel panel = load_panel_file(resolve_data_path(data), &report);
  save_panel_file(panel, out);
  for (auto& t : report.dropped_tickers)
    std::cerr << "dropped ticker with incomplete records: " << t << "\n";
  std::cout << "panel: " << panel.num_stocks() << " stocks x "
            << panel.num_days() << " days -> " << out << "\n";
  Manifest m;
  m.inputs = {{data, file_digest(resolve_data_path(data))}};
  m.outputs = {out};
  m.write(out);
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& data,
              const std::string& out, const std::string& log_path) {
  TrainConfig cfg = load_train_config(config_path);
  StockPanel panel = load_panel_file(resolve_data_path(data));
  ModelParams params;
  Dataset ds;
  FitResult result = train_once(panel, cfg, params, ds);
  save_checkpoint_file(out, cfg, params, ds.stats, ds.tickers);
  Manifest m;
  m.config = train_config_to_json(cfg);
  m.seed = cfg.seed;
  m.inputs = {{config_path, file_digest(config_path)},
              {data, file_digest(resolve_data_path(data))}};
  m.outputs = {out};
  if (!log_path.empty()) {
    write_train_log(log_path, result);
    m.outputs.push_back(log_path);
  }
  m.write(out);
  for (auto& e : result.history)
    std::cout << "epoch " << e.epoch << " loss " << e.train_loss << " val_acc "
              << e.val_acc << " val_mcc " << e.val_mcc << "\n";
  std::cout << "best epoch " << result.best_epoch << " (val_acc "
            << result.best_val_acc << ") -> " << out << "\n";
  return 0;
}

const std::vector<WindowSample>& pick_split(const Dataset& ds,
                                            const std::string& split) {
  if (split == "train") return ds.train;
  if (split == "val") return ds.val;
  if (split == "test") return ds.test;
  throw std::invalid_argument("unknown split '" + split + "'");
}

int cmd_eval(const std::string& ckpt_path, const std::string& data,
             const std::string& split, const std::string& out,
             const std::string& preds_path,
             const std::string& adjacency_dir) {
  Checkpoint ck = load_checkpoint_file(ckpt_path);
  StockPanel panel = load_panel_file(resolve_data_path(data));
  if (panel.num_stocks() != ck.config.model.num_stocks)
    throw DataError("panel has " + std::to_string(panel.num_stocks()) +
                    " stocks, checkpoint expects " +
                    std::to_string(ck.config.model.num_stocks));
  Dataset ds = prepare_dataset_with_stats(panel, ck.config, ck.stats);
  const auto& samples = pick_split(ds, split);
  std::vector<PredictionRow> rows;
  Metrics m =
      evaluate(ck.params, ck.config.model, samples, &ds.tickers, &rows);
  std::cout << "split " << split << ": acc " << m.acc << " mcc " << m.mcc
            << " (" << m.total() << " stock-days)\n";
  Manifest manifest;
  manifest.config = train_config_to_json(ck.config);
  manifest.seed = ck.config.seed;
  manifest.inputs = {{ckpt_path, file_digest(ckpt_path)},
                     {data, file_digest(resolve_data_path(data))}};
  std::string primary = out.empty() ? ckpt_path + ".eval" : out;
  if (!out.empty()) {
    write_metrics_csv(out, dataset_name(data),
                      {{ablation_name(ck.config.model.ablation), m}});
    manifest.outputs.push_back(out);
  }
  if (!preds_path.empty()) {
    std::ofstream pf(preds_path);
    pf << "date,ticker,prob_up,label_pred,label_true\n";
    pf.precision(12);
    for (auto& r : rows)
      pf << r.date << ',' << r.ticker << ',' << r.prob_up << ',' << r.pred
         << ',' << r.label << "\n";
    manifest.outputs.push_back(preds_path);
  }
  if (!adjacency_dir.empty()) {
    fs::create_directories(adjacency_dir);
    std::mt19937_64 rng(0);
    for (auto& s : samples) {
      ForwardDiagnostics diag;
      forward_window(ck.params, ck.config.model, s.window, false, rng,
                     nullptr, &diag);
      for (std::size_t k = 0; k < diag.raw_adjacency.size(); ++k) {
        std::ofstream af(fs::path(adjacency_dir) /
                         ("adj_" + s.anchor_date + "_k" +
                          std::to_string(k + 1) + ".csv"));
        af.precision(12);
        const Tensor& a = diag.raw_adjacency[k];
        for (std::size_t i = 0; i < a.dim(0); ++i) {
          for (std::size_t j = 0; j < a.dim(1); ++j)
            af << (j ? "," : "") << a.at2(i, j);
          af << "\n";
        }
      }
    }
  }
  manifest.write(primary);
  return 0;
}

int cmd_backtest(const std::string& ckpt_path, const std::string& data,
                 const std::string& out, const std::string& summary_path,
                 double cost_bps, double capital, std::size_t top_k) {
  Checkpoint ck = load_checkpoint_file(ckpt_path);
  StockPanel panel = load_panel_file(resolve_data_path(data));
  Dataset ds = prepare_dataset_with_stats(panel, ck.config, ck.stats);
  std::vector<DayPredictions> predictions;
  std::mt19937_64 rng(0);
  for (auto& s : ds.test) {
    // the last test window's next day is the final panel day; it is still
    // markable, so every test sample contributes a trading decision
    ForwardResult res =
        forward_window(ck.params, ck.config.model, s.window, false, rng);
    DayPredictions day;
    day.date = s.anchor_date;
    for (std::size_t i = 0; i < ds.tickers.size(); ++i)
      day.prob_up[ds.tickers[i]] = res.probs.at2(i, 1);
    predictions.push_back(std::move(day));
  }
  BacktestConfig bt;
  bt.cost_bps = cost_bps;
  bt.initial_capital = capital;
  bt.top_k = top_k;
  EquityCurve curve = run_backtest(predictions, panel, bt);
  std::ofstream cf(out);
  if (!cf) throw DataError("cannot open " + out + " for writing");
  cf << "date,value\n";
  cf.precision(12);
  for (auto& p : curve.points) cf << p.date << ',' << p.value << "\n";
  auto rets = curve.daily_returns();
  double mean = 0.0, stdev = 0.0;
  for (double r : rets) mean += r;
  if (!rets.empty()) mean /= static_cast<double>(rets.size());
  for (double r : rets) stdev += (r - mean) * (r - mean);
  if (!rets.empty())
    stdev = std::sqrt(stdev / static_cast<double>(rets.size()));
  Manifest manifest;
  manifest.config = train_config_to_json(ck.config);
  manifest.inputs = {{ckpt_path, file_digest(ckpt_path)},
                     {data, file_digest(resolve_data_path(data))}};
  manifest.outputs = {out};
  if (!summary_path.empty()) {
    json summary{{"final_value", curve.final_value()},
                 {"max_drawdown", curve.max_drawdown()},
                 {"daily_return_mean", mean},
                 {"daily_return_std", stdev},
                 {"days", curve.points.size()}};
    std::ofstream sf(summary_path);
    sf << summary.dump(2) << "\n";
    manifest.outputs.push_back(summary_path);
  }
  manifest.write(out);
  std::cout << "final value " << curve.final_value() << " max drawdown "
            << curve.max_drawdown() << "\n";
  return 0;
}

int cmd_ablate(const std::string& config_path, const std::string& data,
               const std::string& variants_csv, const std::string& out) {
  std::vector<std::string> variants;
  std::stringstream ss(variants_csv);
  std::string item;
  while (std::getline(ss, item, ',')) variants.push_back(item);
  StockPanel panel = load_panel_file(resolve_data_path(data));
  std::vector<std::pair<std::string, Metrics>> rows;
  for (auto& v : variants) {
    TrainConfig cfg = load_train_config(config_path);
    cfg.model.ablation = parse_ablation(v);
    ModelParams params;
    Dataset ds;
    train_once(panel, cfg, params, ds);
    Metrics m = evaluate(params, cfg.model, ds.test);
    std::cout << v << ": acc " << m.acc << " mcc " << m.mcc << "\n";
    rows.emplace_back(v, m);
  }
  write_metrics_csv(out, dataset_name(data), rows);
  Manifest manifest;
  manifest.inputs = {{config_path, file_digest(config_path)},
                     {data, file_digest(resolve_data_path(data))}};
  manifest.outputs = {out};
  manifest.write(out);
  return 0;
}

int cmd_scales(const std::string& config_path, const std::string& data,
               const std::string& k_csv, const std::string& out) {
  std::vector<std::size_t> ks;
  std::stringstream ss(k_csv);
  std::string item;
  while (std::getline(ss, item, ',')) ks.push_back(std::stoul(item));
  StockPanel panel = load_panel_file(resolve_data_path(data));
  std::vector<std::pair<std::string, Metrics>> rows;
  for (auto k : ks) {
    TrainConfig cfg = load_train_config(config_path);
    cfg.model.num_scales = k;
    ModelParams params;
    Dataset ds;
    train_once(panel, cfg, params, ds);
    Metrics m = evaluate(params, cfg.model, ds.test);
    std::cout << "K=" << k << ": acc " << m.acc << " mcc " << m.mcc << "\n";
    rows.emplace_back("K=" + std::to_string(k), m);
  }
  write_metrics_csv(out, dataset_name(data), rows);
  Manifest manifest;
  manifest.inputs = {{config_path, file_digest(config_path)},
                     {data, file_digest(resolve_data_path(data))}};
  manifest.outputs = {out};
  manifest.write(out);
  return 0;
}

int cmd_gradcheck(const std::string& config_path, double tol) {
  // tiny deterministic configuration; a config file may override the
  // architecture knobs, dropout is always forced off
  ModelConfig mc;
  mc.num_stocks = 4;
  mc.window_len = 8;
  mc.num_scales = 2;
  mc.heads = 1;
  mc.attr_rank = 4;
  mc.dropout = 0.0;
  std::uint64_t seed = 0;
  if (!config_path.empty()) {
    TrainConfig cfg = load_train_config(config_path);
    mc = cfg.model;
    mc.num_stocks = 4;
    mc.dropout = 0.0;
    seed = cfg.seed;
  }
  std::mt19937_64 rng(seed);
  ModelParams params;
  params.init(mc, rng);
  Tensor window({mc.num_stocks, mc.window_len, kNumIndicators});
  fill_uniform(window, -1.0, 1.0, rng);
  std::vector<int> labels(mc.num_stocks);
  for (auto& l : labels) l = static_cast<int>(rng() % 2);
  GradCheckReport report = model_gradcheck(params, mc, window, labels);
  for (auto& [name, err] : report.per_group)
    std::cout << name << " rel_err " << err << "\n";
  std::cout << "max rel_err " << report.max_rel_err << " (tol " << tol
            << ")\n";
  if (!report.passed(tol)) {
    std::cerr << "gradient check FAILED\n";
    return 3;
  }
  std::cout << "gradient check passed\n";
  return 0;
}

int cmd_synth(const std::string& out, std::size_t stocks, std::size_t days,
              std::uint64_t seed) {
  SyntheticConfig cfg;
  cfg.num_stocks = stocks;
  cfg.num_days = days;
  cfg.seed = seed;
  StockPanel panel = make_synthetic_panel(cfg);
  save_panel_file(panel, out);
  std::cout << "synthetic panel: " << stocks << " stocks x " << days
            << " days -> " << out << "\n";
  Manifest m;
  m.seed = seed;
  m.outputs = {out};
  m.write(out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MS-HGFN stock movement pipeline"};
  app.require_subcommand(1);

  std::string data, out, config_path, ckpt_path, split = "test";
  std::string log_path, preds_path, summary_path, adjacency_dir;
  std::string variants = "none,no_features_sr,concat_fusion,lstm_temporal";
  std::string k_list = "2,3,4";
  double cost_bps = 0.0, capital = 10'000'000.0, tol = 1e-4;
  std::size_t top_k = 5, stocks = 20, days = 600;
  std::uint64_t seed = 0;

  auto* ingest = app.add_subcommand("ingest", "validate a raw OHLCV CSV");
  ingest->add_option("--data", data, "input CSV")->required();
  ingest->add_option("--out", out, "validated panel CSV")->required();

  auto* train = app.add_subcommand("train", "train a model");
  train->add_option("--config", config_path, "JSON config")->required();
  train->add_option("--data", data, "panel CSV")->required();
  train->add_option("--out", out, "checkpoint path")->required();
  train->add_option("--log", log_path, "training log CSV");

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  eval_cmd->add_option("--ckpt", ckpt_path)->required();
  eval_cmd->add_option("--data", data)->required();
  eval_cmd->add_option("--split", split, "train|val|test");
  eval_cmd->add_option("--out", out, "metrics CSV");
  eval_cmd->add_option("--preds", preds_path, "per-prediction CSV");
  eval_cmd->add_option("--dump-adjacency", adjacency_dir,
                       "dump per-window stock adjacency CSVs here");

  auto* backtest = app.add_subcommand("backtest", "top-k portfolio replay");
  backtest->add_option("--ckpt", ckpt_path)->required();
  backtest->add_option("--data", data)->required();
  backtest->add_option("--out", out, "equity curve CSV")->required();
  backtest->add_option("--summary", summary_path, "JSON summary");
  backtest->add_option("--cost-bps", cost_bps, "per-side cost in bps");
  backtest->add_option("--capital", capital, "initial capital");
  backtest->add_option("--top-k", top_k, "names held per day");

  auto* ablate = app.add_subcommand("ablate", "run ablation variants");
  ablate->add_option("--config", config_path)->required();
  ablate->add_option("--data", data)->required();
  ablate->add_option("--variants", variants, "comma-separated list");
  ablate->add_option("--out", out, "comparison CSV")->required();

  auto* scales = app.add_subcommand("scales", "sweep the scale count K");
  scales->add_option("--config", config_path)->required();
  scales->add_option("--data", data)->required();
  scales->add_option("--k", k_list, "comma-separated K values");
  scales->add_option("--out", out, "comparison CSV")->required();

  auto* gradcheck = app.add_subcommand(
      "gradcheck", "full-model finite-difference gradient check");
  gradcheck->add_option("--config", config_path);
  gradcheck->add_option("--tol", tol, "max relative error");

  auto* synth = app.add_subcommand("synth", "generate a synthetic panel");
  synth->add_option("--out", out)->required();
  synth->add_option("--stocks", stocks);
  synth->add_option("--days", days);
  synth->add_option("--seed", seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*ingest) return cmd_ingest(data, out);
    if (*train) return cmd_train(config_path, data, out, log_path);
    if (*eval_cmd)
      return cmd_eval(ckpt_path, data, split, out, preds_path, adjacency_dir);
    if (*backtest)
      return cmd_backtest(ckpt_path, data, out, summary_path, cost_bps,
                          capital, top_k);
    if (*ablate) return cmd_ablate(config_path, data, variants, out);
    if (*scales) return cmd_scales(config_path, data, k_list, out);
    if (*gradcheck) return cmd_gradcheck(config_path, tol);
    if (*synth) return cmd_synth(out, stocks, days, seed);
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const ParseError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
