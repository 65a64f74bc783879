#pragma once

#include <fstream>
#include <string>

#include <json.hpp>

#include "mshgfn/data.hpp"
#include "mshgfn/model.hpp"
#include "mshgfn/train.hpp"

namespace mshgfn {

using nlohmann::json;

inline json train_config_to_json(const TrainConfig& cfg) {
  return json{
      {"learning_rate", cfg.learning_rate},
      {"batch_size", cfg.batch_size},
      {"epochs", cfg.epochs},
      {"seed", cfg.seed},
      {"grad_clip", cfg.grad_clip},
      {"early_stop_acc", cfg.early_stop_acc},
      {"window_len", cfg.model.window_len},
      {"num_scales", cfg.model.num_scales},
      {"embed_dim", cfg.model.embed_dim},
      {"heads", cfg.model.heads},
      {"attr_rank", cfg.model.attr_rank},
      {"share_attr_matrices", cfg.model.share_attr_matrices},
      {"share_gate_weights", cfg.model.share_gate_weights},
      {"time_mean_pool", cfg.model.time_mean_pool},
      {"dropout", cfg.model.dropout},
      {"ablation", ablation_name(cfg.model.ablation)},
      {"label_mode", cfg.label_mode == LabelMode::kReturnThreshold
                         ? "return_threshold"
                         : "close_vs_open"},
      {"gamma", cfg.gamma},
  };
}

inline TrainConfig train_config_from_json(const json& j) {
  TrainConfig cfg;
  auto get = [&](const char* key, auto& slot) {
    if (j.contains(key)) slot = j.at(key).get<std::decay_t<decltype(slot)>>();
  };
  get("learning_rate", cfg.learning_rate);
  get("batch_size", cfg.batch_size);
  get("epochs", cfg.epochs);
  get("seed", cfg.seed);
  get("grad_clip", cfg.grad_clip);
  get("early_stop_acc", cfg.early_stop_acc);
  get("window_len", cfg.model.window_len);
  get("num_scales", cfg.model.num_scales);
  get("embed_dim", cfg.model.embed_dim);
  get("heads", cfg.model.heads);
  get("attr_rank", cfg.model.attr_rank);
  get("share_attr_matrices", cfg.model.share_attr_matrices);
  get("share_gate_weights", cfg.model.share_gate_weights);
  get("time_mean_pool", cfg.model.time_mean_pool);
  get("dropout", cfg.model.dropout);
  get("gamma", cfg.gamma);
  if (j.contains("ablation"))
    cfg.model.ablation = parse_ablation(j.at("ablation").get<std::string>());
  if (j.contains("label_mode")) {
    std::string m = j.at("label_mode").get<std::string>();
    if (m == "return_threshold")
      cfg.label_mode = LabelMode::kReturnThreshold;
    else if (m == "close_vs_open")
      cfg.label_mode = LabelMode::kCloseVsOpen;
    else
      throw std::invalid_argument("unknown label_mode '" + m + "'");
  }
  return cfg;
}

inline json norm_stats_to_json(const NormStats& st,
                               const std::vector<std::string>& tickers) {
  static const char* names[kNumIndicators] = {"open", "high", "low", "close",
                                              "volume"};
  json out = json::object();
  for (std::size_t i = 0; i < st.num_stocks; ++i) {
    json per = json::object();
    for (std::size_t k = 0; k < kNumIndicators; ++k)
      per[names[k]] = json{{"mean", st.m(i, k)}, {"std", st.s(i, k)}};
    out[tickers[i]] = per;
  }
  return out;
}

inline NormStats norm_stats_from_json(const json& j,
                                      const std::vector<std::string>& tickers) {
  static const char* names[kNumIndicators] = {"open", "high", "low", "close",
                                              "volume"};
  NormStats st;
  st.num_stocks = tickers.size();
  st.mean.assign(st.num_stocks * kNumIndicators, 0.0);
  st.stdev.assign(st.num_stocks * kNumIndicators, 0.0);
  for (std::size_t i = 0; i < st.num_stocks; ++i) {
    const json& per = j.at(tickers[i]);
    for (std::size_t k = 0; k < kNumIndicators; ++k) {
      st.mean[i * kNumIndicators + k] =
          per.at(names[k]).at("mean").get<double>();
      st.stdev[i * kNumIndicators + k] =
          per.at(names[k]).at("std").get<double>();
    }
  }
  return st;
}

// Portable checkpoint: config, tickers, normalization stats, and every
// parameter tensor with its shape and values.
inline json checkpoint_to_json(const TrainConfig& cfg, ModelParams& params,
                               const NormStats& stats,
                               const std::vector<std::string>& tickers) {
  json j;
  j["format"] = "mshgfn-checkpoint-v1";
  j["config"] = train_config_to_json(cfg);
  j["num_stocks"] = cfg.model.num_stocks;
  j["tickers"] = tickers;
  j["norm_stats"] = norm_stats_to_json(stats, tickers);
  json tensors = json::array();
  for (auto& np : params.named(cfg.model)) {
    tensors.push_back(json{{"name", np.name},
                           {"shape", np.tensor->shape()},
                           {"values", np.tensor->values()}});
  }
  j["params"] = std::move(tensors);
  return j;
}

struct Checkpoint {
  TrainConfig config;
  ModelParams params;
  NormStats stats;
  std::vector<std::string> tickers;
};

inline Checkpoint checkpoint_from_json(const json& j) {
  if (!j.contains("format") || j["format"] != "mshgfn-checkpoint-v1")
    throw DataError("not an mshgfn checkpoint");
  Checkpoint ck;
  ck.config = train_config_from_json(j.at("config"));
  ck.config.model.num_stocks = j.at("num_stocks").get<std::size_t>();
  ck.tickers = j.at("tickers").get<std::vector<std::string>>();
  ck.stats = norm_stats_from_json(j.at("norm_stats"), ck.tickers);
  std::mt19937_64 rng(0);
  ck.params.init(ck.config.model, rng);
  auto named = ck.params.named(ck.config.model);
  const json& tensors = j.at("params");
  if (tensors.size() != named.size())
    throw DataError("checkpoint parameter count mismatch");
  for (std::size_t i = 0; i < named.size(); ++i) {
    const json& t = tensors[i];
    if (t.at("name").get<std::string>() != named[i].name)
      throw DataError("checkpoint parameter order mismatch at " +
                      named[i].name);
    Shape shape = t.at("shape").get<Shape>();
    std::vector<double> values = t.at("values").get<std::vector<double>>();
    if (shape != named[i].tensor->shape() ||
        values.size() != named[i].tensor->size())
      throw DataError("checkpoint shape mismatch at " + named[i].name);
    named[i].tensor->values() = std::move(values);
  }
  return ck;
}

inline void save_checkpoint_file(const std::string& path,
                                 const TrainConfig& cfg, ModelParams& params,
                                 const NormStats& stats,
                                 const std::vector<std::string>& tickers) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open " + path + " for writing");
  out << checkpoint_to_json(cfg, params, stats, tickers).dump();
}

inline Checkpoint load_checkpoint_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  json j;
  in >> j;
  return checkpoint_from_json(j);
}

}  // namespace mshgfn
