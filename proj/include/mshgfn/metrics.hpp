#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

namespace mshgfn {

struct Metrics {
  double acc = 0.0;
  double mcc = 0.0;
  long long tp = 0, tn = 0, fp = 0, fn = 0;

  long long total() const { return tp + tn + fp + fn; }
};

inline Metrics confusion_metrics(const std::vector<int>& preds,
                                 const std::vector<int>& labels) {
  if (preds.empty() || preds.size() != labels.size())
    throw std::invalid_argument(
        "metrics: need equal-length non-empty prediction/label vectors");
  Metrics m;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (labels[i] == 1)
      preds[i] == 1 ? ++m.tp : ++m.fn;
    else
      preds[i] == 1 ? ++m.fp : ++m.tn;
  }
  m.acc = static_cast<double>(m.tp + m.tn) / static_cast<double>(m.total());
  double f1 = static_cast<double>(m.tp + m.fp);
  double f2 = static_cast<double>(m.tp + m.fn);
  double f3 = static_cast<double>(m.tn + m.fp);
  double f4 = static_cast<double>(m.tn + m.fn);
  double denom = std::sqrt(f1) * std::sqrt(f2) * std::sqrt(f3) * std::sqrt(f4);
  // any zero factor -> MCC defined as 0
  m.mcc = denom == 0.0
              ? 0.0
              : (static_cast<double>(m.tp) * static_cast<double>(m.tn) -
                 static_cast<double>(m.fp) * static_cast<double>(m.fn)) /
                    denom;
  return m;
}

inline double accuracy(const std::vector<int>& preds,
                       const std::vector<int>& labels) {
  return confusion_metrics(preds, labels).acc;
}

inline double mcc(const std::vector<int>& preds,
                  const std::vector<int>& labels) {
  return confusion_metrics(preds, labels).mcc;
}

}  // namespace mshgfn
