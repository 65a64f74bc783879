#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mshgfn/gradcheck.hpp"
#include "mshgfn/model.hpp"

namespace mshgfn {

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::vector<std::pair<std::string, double>> per_group;

  bool passed(double tol = 1e-4) const { return max_rel_err < tol; }
};

// Finite-difference verification of the full model: every parameter group's
// analytic gradient of the cross-entropy loss is checked coordinate by
// coordinate against central differences.  Dropout must be disabled in the
// supplied config.
inline GradCheckReport model_gradcheck(ModelParams& params,
                                       const ModelConfig& cfg,
                                       const Tensor& window,
                                       const std::vector<int>& labels,
                                       double eps = 1e-4) {
  if (cfg.dropout != 0.0)
    throw std::invalid_argument("model_gradcheck requires dropout = 0");
  std::mt19937_64 rng(0);
  auto loss_value = [&]() {
    return forward_window(params, cfg, window, /*training=*/false, rng,
                          &labels)
        .loss.at(0);
  };
  params.zero_grads(cfg);
  forward_window(params, cfg, window, false, rng, &labels).loss.backward();
  auto named = params.named(cfg);
  std::vector<std::vector<double>> analytic;
  for (auto& np : named) analytic.push_back(np.tensor->grad());
  GradCheckReport report;
  for (std::size_t i = 0; i < named.size(); ++i) {
    double err =
        finite_difference_check(loss_value, *named[i].tensor, analytic[i], eps);
    report.per_group.emplace_back(named[i].name, err);
    report.max_rel_err = std::max(report.max_rel_err, err);
  }
  return report;
}

}  // namespace mshgfn
