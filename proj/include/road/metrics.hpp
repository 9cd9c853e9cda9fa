#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "road/errors.hpp"

namespace road {

// Scores with their hard 0/1 decisions at the 0.5 threshold; a score of
// exactly 0.5 decides 0, so "score > 0.5" is the single source of truth.
struct Predictions {
  std::vector<double> score;
  std::vector<int> hard;

  explicit Predictions(std::vector<double> sc) : score(std::move(sc)) {
    hard.reserve(score.size());
    for (double v : score) hard.push_back(v > 0.5 ? 1 : 0);
  }
};

inline double accuracy(const Predictions& pred, const std::vector<int>& y) {
  if (pred.hard.size() != y.size()) throw NumericError("accuracy: size mismatch");
  if (y.empty()) throw UndefinedMetricError("accuracy: empty set");
  std::size_t ok = 0;
  for (std::size_t i = 0; i < y.size(); ++i) ok += pred.hard[i] == y[i];
  return static_cast<double>(ok) / static_cast<double>(y.size());
}

namespace detail {

// |positive rate difference| between sensitive groups over the given indices
inline double rate_gap(const std::vector<int>& hard, const std::vector<int>& s,
                       const std::vector<std::size_t>& idx) {
  double sum1 = 0.0, sum0 = 0.0;
  std::size_t n1 = 0, n0 = 0;
  for (std::size_t i : idx) {
    if (s[i]) {
      sum1 += hard[i];
      ++n1;
    } else {
      sum0 += hard[i];
      ++n0;
    }
  }
  if (n0 == 0 || n1 == 0)
    throw UndefinedMetricError("disparate impact: a sensitive group is empty");
  return std::abs(sum1 / static_cast<double>(n1) - sum0 / static_cast<double>(n0));
}

inline std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  return idx;
}

}  // namespace detail

// Demographic disparity of the hard classifier: |P(hy=1|s=1) - P(hy=1|s=0)|.
inline double global_di(const Predictions& pred, const std::vector<int>& s) {
  if (pred.hard.size() != s.size()) throw NumericError("global_di: size mismatch");
  return detail::rate_gap(pred.hard, s, detail::all_indices(s.size()));
}

// Same disparity restricted to one subgroup's indices.
inline double local_di(const Predictions& pred, const std::vector<int>& s,
                       const std::vector<std::size_t>& subgroup_idx) {
  if (pred.hard.size() != s.size()) throw NumericError("local_di: size mismatch");
  if (subgroup_idx.empty()) throw UndefinedMetricError("local_di: empty subgroup");
  for (std::size_t i : subgroup_idx)
    if (i >= s.size()) throw NumericError("local_di: index out of range");
  return detail::rate_gap(pred.hard, s, subgroup_idx);
}

// k-th largest local disparity: k = 1 is the worst subgroup. k beyond the
// number of subgroups clamps to the smallest value.
inline double worst_k_di(std::vector<double> local_dis, std::size_t k) {
  if (local_dis.empty()) throw UndefinedMetricError("worst_k_di: no subgroups");
  if (k == 0) throw ConfigError("worst_k_di: k must be at least 1");
  std::sort(local_dis.begin(), local_dis.end(), std::greater<double>());
  const std::size_t at = std::min(k, local_dis.size()) - 1;
  return local_dis[at];
}

// Equalized-odds gap: max of the TPR and FPR differences between groups.
inline double eo_gap(const Predictions& pred, const std::vector<int>& y,
                     const std::vector<int>& s) {
  if (pred.hard.size() != y.size() || y.size() != s.size())
    throw NumericError("eo_gap: size mismatch");
  double pos[2] = {0, 0}, pos_hit[2] = {0, 0};
  double neg[2] = {0, 0}, neg_hit[2] = {0, 0};
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i]) {
      pos[s[i]] += 1;
      pos_hit[s[i]] += pred.hard[i];
    } else {
      neg[s[i]] += 1;
      neg_hit[s[i]] += pred.hard[i];
    }
  }
  for (int g = 0; g < 2; ++g)
    if (pos[g] == 0 || neg[g] == 0)
      throw UndefinedMetricError("eo_gap: a (class, group) cell is empty");
  const double tpr_gap = std::abs(pos_hit[1] / pos[1] - pos_hit[0] / pos[0]);
  const double fpr_gap = std::abs(neg_hit[1] / neg[1] - neg_hit[0] / neg[0]);
  return std::max(tpr_gap, fpr_gap);
}

struct ParetoPoint {
  double x = 0.0;  // minimized, e.g. worst-subgroup disparity
  double y = 0.0;  // maximized, e.g. accuracy
};

// Indices of the non-dominated points, in index order. A point is dominated
// if some other point is at least as good on both axes and strictly better
// on one; exact duplicates are all kept.
inline std::vector<std::size_t> pareto_front(const std::vector<ParetoPoint>& pts) {
  std::vector<std::size_t> order(pts.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (pts[a].x != pts[b].x) return pts[a].x < pts[b].x;
    return pts[a].y > pts[b].y;
  });
  std::vector<std::size_t> front;
  double best_y = -std::numeric_limits<double>::infinity();
  std::size_t i = 0;
  while (i < order.size()) {
    // all points sharing this x, sorted with the max y first
    std::size_t j = i;
    const double x = pts[order[i]].x;
    const double top_y = pts[order[i]].y;
    while (j < order.size() && pts[order[j]].x == x) {
      if (pts[order[j]].y == top_y && top_y > best_y) front.push_back(order[j]);
      ++j;
    }
    best_y = std::max(best_y, top_y);
    i = j;
  }
  std::sort(front.begin(), front.end());
  return front;
}

// One evaluated training run: held-out metrics, ratio diagnostics and the
// resolved configuration, serialized as a single flat-ish JSON object.
struct RunReport {
  nlohmann::json config;  // algorithm, mode, grids, seeds, learning rates...
  std::size_t n_train = 0, n_test = 0;
  double accuracy = 0.0;
  double global_di = 0.0;
  double eo_gap = 0.0;
  double worst1_di = 0.0;
  double worst3_di = 0.0;
  std::map<std::string, double> local_di;
  std::map<std::string, double> subgroup_mean_r;
  std::map<std::string, std::size_t> subgroup_size;
  double r_mean = 1.0, r_var = 0.0;
  std::vector<std::size_t> r_hist;  // 20 bins on [0,2) plus an overflow bin
  double train_loss_y = 0.0, train_loss_s = 0.0;
  double wall_ms = 0.0;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["config"] = config;
    j["n_train"] = n_train;
    j["n_test"] = n_test;
    j["accuracy"] = accuracy;
    j["global_di"] = global_di;
    j["eo_gap"] = eo_gap;
    j["worst1_di"] = worst1_di;
    j["worst3_di"] = worst3_di;
    j["local_di"] = local_di;
    j["subgroup_mean_r"] = subgroup_mean_r;
    j["subgroup_size"] = subgroup_size;
    j["r_mean"] = r_mean;
    j["r_var"] = r_var;
    j["r_hist"] = r_hist;
    j["train_loss_y"] = train_loss_y;
    j["train_loss_s"] = train_loss_s;
    j["wall_ms"] = wall_ms;
    return j;
  }
};

inline std::vector<std::size_t> ratio_histogram(const std::vector<double>& r) {
  std::vector<std::size_t> hist(21, 0);
  for (double v : r) {
    const std::size_t bin = v >= 2.0 ? 20 : static_cast<std::size_t>(v / 0.1);
    ++hist[std::min<std::size_t>(bin, 20)];
  }
  return hist;
}

}  // namespace road
