#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "road/errors.hpp"

namespace road {

enum class NormMode { Conditional, Global };

namespace detail {

// Groups as index lists; Conditional splits by sensitive value, Global pools.
inline std::vector<std::vector<std::size_t>> norm_pools(const std::vector<int>& s, std::size_t n,
                                                        NormMode mode) {
  std::vector<std::vector<std::size_t>> pools;
  if (mode == NormMode::Global) {
    pools.emplace_back();
    pools[0].reserve(n);
    for (std::size_t i = 0; i < n; ++i) pools[0].push_back(i);
  } else {
    std::vector<std::size_t> g0, g1;
    for (std::size_t i = 0; i < n; ++i) (s[i] ? g1 : g0).push_back(i);
    if (!g0.empty()) pools.push_back(std::move(g0));
    if (!g1.empty()) pools.push_back(std::move(g1));
  }
  return pools;
}

// r_i = exp(h_i) / pool-mean(exp(h_j)), computed with the pool max subtracted
// from every exponent. The shift cancels between numerator and denominator so
// the result is algebraically unchanged, but exp never overflows.
inline std::vector<double> exp_normalize(const std::vector<double>& h,
                                         const std::vector<std::vector<std::size_t>>& pools) {
  std::vector<double> r(h.size(), 0.0);
  for (const auto& pool : pools) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t i : pool) m = std::max(m, h[i]);
    double sum = 0.0;
    for (std::size_t i : pool) sum += std::exp(h[i] - m);
    const double denom = sum / static_cast<double>(pool.size());
    for (std::size_t i : pool) r[i] = std::exp(h[i] - m) / denom;
  }
  return r;
}

}  // namespace detail

// Maps raw scores h to weights with mean one inside each sensitive group.
inline std::vector<double> normalize_conditional(const std::vector<double>& h,
                                                 const std::vector<int>& s) {
  if (h.size() != s.size()) throw NumericError("normalize_conditional: size mismatch");
  if (h.empty()) throw NumericError("normalize_conditional: empty batch");
  return detail::exp_normalize(h, detail::norm_pools(s, h.size(), NormMode::Conditional));
}

// Same map with a single pool over the whole batch.
inline std::vector<double> normalize_global(const std::vector<double>& h) {
  if (h.empty()) throw NumericError("normalize_global: empty batch");
  std::vector<int> s(h.size(), 0);
  return detail::exp_normalize(h, detail::norm_pools(s, h.size(), NormMode::Global));
}

inline std::vector<double> normalize(const std::vector<double>& h, const std::vector<int>& s,
                                     NormMode mode) {
  return mode == NormMode::Conditional ? normalize_conditional(h, s)
                                       : normalize_global(h);
}

// Backward through the exp-mean quotient. With r_i = e^{h_i} / ((1/m) sum_G e^{h_j})
// over pool G of size m:
//   dr_i/dh_k = delta_ik r_i - r_i r_k / m          (i, k in the same pool)
// so for upstream u = dJ/dr:
//   dJ/dh_k = r_k (u_k - (1/m) sum_{i in G} u_i r_i)
// The max-shift used in the forward is constant per pool and drops out.
inline std::vector<double> normalize_backward(const std::vector<double>& r,
                                              const std::vector<int>& s,
                                              const std::vector<double>& dJ_dr, NormMode mode) {
  if (r.size() != dJ_dr.size() || r.size() != s.size())
    throw NumericError("normalize_backward: size mismatch");
  auto pools = detail::norm_pools(s, r.size(), mode);
  std::vector<double> dh(r.size(), 0.0);
  for (const auto& pool : pools) {
    double mean_ur = 0.0;
    for (std::size_t i : pool) mean_ur += dJ_dr[i] * r[i];
    mean_ur /= static_cast<double>(pool.size());
    for (std::size_t k : pool) dh[k] = r[k] * (dJ_dr[k] - mean_ur);
  }
  return dh;
}

// Closed-form inner solution: r_i = e^{-L_i/tau} / pool-mean(e^{-L_j/tau}).
// This is the exact minimizer of pool-mean(r L) + tau * pool-mean(r log r)
// subject to pool-mean(r) = 1, r >= 0: the Lagrangian gives
// L_i + tau (1 + log r_i) + kappa = 0, i.e. log r_i = -L_i/tau + const, and
// the constraint fixes the constant to the pool-mean denominator.
inline std::vector<double> broad_weights(const std::vector<double>& loss, const std::vector<int>& s,
                                         double tau, NormMode mode) {
  if (loss.size() != s.size()) throw NumericError("broad_weights: size mismatch");
  if (loss.empty()) throw NumericError("broad_weights: empty batch");
  if (!(tau > 0.0)) throw NumericError("broad_weights: tau must be positive");
  std::vector<double> h(loss.size());
  for (std::size_t i = 0; i < loss.size(); ++i) h[i] = -loss[i] / tau;
  return detail::exp_normalize(h, detail::norm_pools(s, loss.size(), mode));
}

// Batch-mean of r log r, with 0 log 0 taken as 0. Zero iff r is identically
// one on the batch; grows as the weights concentrate.
inline double kl_term(const std::vector<double>& r) {
  if (r.empty()) throw NumericError("kl_term: empty batch");
  double acc = 0.0;
  for (double v : r) {
    if (v < 0.0) throw NumericError("kl_term: negative weight");
    if (v > 0.0) acc += v * std::log(v);
  }
  return acc / static_cast<double>(r.size());
}

// Weights assigned to a fully fair predictor, where the adversary loss is the
// best guess from the base rate alone: L(s) = -log p(s). Conditional
// normalization gives weight one for everybody. Global normalization gives
//   w_s = p_s^{1/tau} / (p1^{1+1/tau} + p0^{1+1/tau})
// which favors the majority group: e.g. p1 = 0.8, tau = 1 -> w1 = 0.8/0.68.
struct FullyFairWeights {
  double conditional_s1 = 1.0;
  double conditional_s0 = 1.0;
  double global_s1 = 1.0;
  double global_s0 = 1.0;
};

inline FullyFairWeights fully_fair_weight_analysis(double p_s1, double tau) {
  if (!(p_s1 > 0.0 && p_s1 < 1.0)) throw NumericError("fully_fair_weight_analysis: p_s1 outside (0,1)");
  if (!(tau > 0.0)) throw NumericError("fully_fair_weight_analysis: tau must be positive");
  const double p1 = p_s1, p0 = 1.0 - p_s1;
  const double z = std::pow(p1, 1.0 + 1.0 / tau) + std::pow(p0, 1.0 + 1.0 / tau);
  FullyFairWeights w;
  w.global_s1 = std::pow(p1, 1.0 / tau) / z;
  w.global_s0 = std::pow(p0, 1.0 / tau) / z;
  return w;
}

}  // namespace road
