#pragma once

// Evaluation of verdicts against ground truth: precision/recall/F1 from
// confusion counts, ROC-AUC via the rank statistic (ties get half credit),
// AUPR via step-wise precision-recall integration. Pure functions.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace logsieve {

struct ConfusionCounts {
  int64_t tp = 0, fp = 0, fn = 0, tn = 0;
  int64_t total() const { return tp + fp + fn + tn; }
};

struct Prf1 {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool degenerate = false;  // a zero denominator was coerced to 0
};

inline Prf1 prf1(const ConfusionCounts& c) {
  Prf1 r;
  if (c.tp + c.fp > 0) r.precision = static_cast<double>(c.tp) / (c.tp + c.fp);
  else r.degenerate = true;
  if (c.tp + c.fn > 0) r.recall = static_cast<double>(c.tp) / (c.tp + c.fn);
  else r.degenerate = true;
  if (r.precision + r.recall > 0.0)
    r.f1 = 2.0 * r.precision * r.recall / (r.precision + r.recall);
  else r.degenerate = true;
  return r;
}

inline ConfusionCounts counts_from_scores(const std::vector<double>& scores,
                                          const std::vector<int>& labels, double threshold) {
  if (scores.size() != labels.size())
    throw std::invalid_argument("counts_from_scores: size mismatch");
  ConfusionCounts c;
  for (size_t i = 0; i < scores.size(); ++i) {
    const bool pred = scores[i] > threshold;  // strict
    if (labels[i] != 0) (pred ? c.tp : c.fn) += 1;
    else (pred ? c.fp : c.tn) += 1;
  }
  return c;
}

struct RankMetrics {
  double auc = 0.0;
  double aupr = 0.0;
};

inline RankMetrics auc_aupr(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("auc_aupr: size mismatch");
  int64_t pos = 0, neg = 0;
  for (int y : labels) (y != 0 ? pos : neg) += 1;
  if (pos == 0 || neg == 0)
    throw std::invalid_argument("auc_aupr: need at least one positive and one negative");

  std::vector<size_t> order(scores.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return scores[a] < scores[b]; });

  // rank-sum AUC with average ranks for ties
  RankMetrics out;
  double pos_rank_sum = 0.0;
  for (size_t i = 0; i < order.size();) {
    size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
    for (size_t k = i; k < j; ++k)
      if (labels[order[k]] != 0) pos_rank_sum += avg_rank;
    i = j;
  }
  out.auc = (pos_rank_sum - 0.5 * pos * (pos + 1)) / (static_cast<double>(pos) * neg);

  // descending-score sweep; tied scores move as one block
  std::reverse(order.begin(), order.end());
  double prev_recall = 0.0;
  int64_t tp = 0, fp = 0;
  for (size_t i = 0; i < order.size();) {
    size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    for (size_t k = i; k < j; ++k) (labels[order[k]] != 0 ? tp : fp) += 1;
    const double recall = static_cast<double>(tp) / pos;
    const double precision = static_cast<double>(tp) / (tp + fp);
    out.aupr += (recall - prev_recall) * precision;
    prev_recall = recall;
    i = j;
  }
  return out;
}

struct EvalReport {
  ConfusionCounts counts;
  Prf1 scores;
  double auc = 0.0;
  double aupr = 0.0;
  bool rank_metrics_valid = false;
  double threshold = 0.0;
  std::string dataset_fingerprint;
  nlohmann::json config_echo;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["counts"] = {{"tp", counts.tp}, {"fp", counts.fp}, {"fn", counts.fn}, {"tn", counts.tn}};
    j["precision"] = scores.precision;
    j["recall"] = scores.recall;
    j["f1"] = scores.f1;
    j["degenerate"] = scores.degenerate;
    if (rank_metrics_valid) {
      j["auc"] = auc;
      j["aupr"] = aupr;
    }
    j["threshold"] = threshold;
    j["dataset_fingerprint"] = dataset_fingerprint;
    if (!config_echo.is_null()) j["config"] = config_echo;
    return j;
  }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("EvalReport::save: cannot open " + path);
    out << to_json().dump(2) << '\n';
  }
};

}  // namespace logsieve
