#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "road/dataset.hpp"
#include "road/errors.hpp"
#include "road/rng.hpp"

namespace road {

// Planted-bias generator. Samples live in `regions` age bands of width 10.
// Within region k a fraction |off_k| of individuals are "swing" cases whose
// outcome is tied to the sensitive attribute (off_k >= 0 ties y = s, negative
// ties y = 1-s); everyone else follows the neutral rule y = 1{score > 0.5}.
// That construction makes the within-region label disparity equal to off_k
// exactly, and the optimal hard classifier reproduces the same disparity, so
// tests can check recovered local bias against a known planted value.
//
// The `leak` feature carries the sensitive attribute almost losslessly
// (disjoint supports up to Gaussian noise), which is what lets an unfair
// predictor exploit it. `drift` tilts the region mixture toward high-k
// regions without touching any conditional, for covariate-shift evaluation.
struct SynthConfig {
  std::size_t n = 4000;
  std::size_t regions = 8;
  double base_bias = 0.0;
  std::vector<double> region_bias;  // empty: ramp from 0 to 0.55 across regions
  double drift = 0.0;
  double leak_noise = 0.15;
};

namespace detail {

inline std::vector<double> region_offsets(const SynthConfig& cfg) {
  if (cfg.regions == 0) throw ConfigError("synthesize: regions must be positive");
  std::vector<double> off(cfg.regions, cfg.base_bias);
  if (cfg.region_bias.empty()) {
    for (std::size_t k = 0; k < cfg.regions; ++k)
      off[k] += cfg.regions == 1 ? 0.0
                                 : 0.55 * static_cast<double>(k) /
                                       static_cast<double>(cfg.regions - 1);
  } else {
    if (cfg.region_bias.size() != cfg.regions)
      throw ConfigError("synthesize: region_bias length differs from regions");
    for (std::size_t k = 0; k < cfg.regions; ++k) off[k] += cfg.region_bias[k];
  }
  for (double v : off)
    if (std::abs(v) > 1.0) throw ConfigError("synthesize: |bias| above 1 in some region");
  return off;
}

inline std::vector<double> region_mixture(const SynthConfig& cfg) {
  std::vector<double> pi(cfg.regions, 1.0);
  if (cfg.regions > 1) {
    for (std::size_t k = 0; k < cfg.regions; ++k) {
      const double pos = 2.0 * static_cast<double>(k) / static_cast<double>(cfg.regions - 1) - 1.0;
      pi[k] = std::max(1.0 + cfg.drift * pos, 0.05);
    }
  }
  double sum = 0.0;
  for (double v : pi) sum += v;
  for (double& v : pi) v /= sum;
  return pi;
}

inline double p_s1_in_region(const SynthConfig& cfg, std::size_t k) {
  if (cfg.regions == 1) return 0.5;
  return 0.35 + 0.3 * static_cast<double>(k) / static_cast<double>(cfg.regions - 1);
}

}  // namespace detail

inline Dataset synthesize(const SynthConfig& cfg, RngState& rng) {
  if (cfg.n == 0) throw ConfigError("synthesize: n must be positive");
  const auto off = detail::region_offsets(cfg);
  const auto pi = detail::region_mixture(cfg);

  Dataset ds;
  ds.feature_names = {"age", "score", "swing", "leak", "member"};
  ds.label_name = "outcome";
  ds.sensitive_name = "group";
  ds.X = Matrix(cfg.n, 5);
  ds.y.resize(cfg.n);
  ds.s.resize(cfg.n);

  for (std::size_t i = 0; i < cfg.n; ++i) {
    double pick = rng.uniform();
    std::size_t k = 0;
    while (k + 1 < cfg.regions && pick >= pi[k]) {
      pick -= pi[k];
      ++k;
    }
    const int s = rng.uniform() < detail::p_s1_in_region(cfg, k) ? 1 : 0;
    const double age = 10.0 * static_cast<double>(k) + 10.0 * rng.uniform();
    const double score = rng.uniform();
    const double swing = rng.uniform();
    const double leak =
        (2.0 * s - 1.0) * (0.6 + 0.4 * rng.uniform()) + rng.normal(0.0, cfg.leak_noise);
    const double member = rng.uniform() < 0.5 ? 1.0 : 0.0;

    int y;
    if (swing < std::abs(off[k])) {
      y = off[k] >= 0.0 ? s : 1 - s;
    } else {
      y = score > 0.5 ? 1 : 0;
    }

    double* row = ds.X.row(i);
    row[0] = age;
    row[1] = score;
    row[2] = swing;
    row[3] = leak;
    row[4] = member;
    ds.y[i] = y;
    ds.s[i] = s;
  }
  return ds;
}

namespace detail {

inline double std_normal_cdf(double x) { return 0.5 * std::erfc(-x * M_SQRT1_2); }

// Density of the leak feature given s: uniform ramp convolved with the noise.
inline double leak_density(double leak, int s, double sigma) {
  const double a = s ? 0.6 : -1.0;
  const double b = s ? 1.0 : -0.6;
  return (std_normal_cdf((leak - a) / sigma) - std_normal_cdf((leak - b) / sigma)) / (b - a);
}

}  // namespace detail

// Exact P(y = 1 | x) under the generator, for raw (unstandardized) rows.
// On swing rows the label equals (a function of) s, which is unobserved, so
// the posterior reduces to P(s | leak, region) by Bayes' rule.
inline std::vector<double> bayes_scores(const Dataset& raw, const SynthConfig& cfg) {
  const auto off = detail::region_offsets(cfg);
  const std::size_t j_age = raw.feature_index("age");
  const std::size_t j_score = raw.feature_index("score");
  const std::size_t j_swing = raw.feature_index("swing");
  const std::size_t j_leak = raw.feature_index("leak");

  std::vector<double> p(raw.n());
  for (std::size_t i = 0; i < raw.n(); ++i) {
    const double* row = raw.X.row(i);
    long long k = static_cast<long long>(std::floor(row[j_age] / 10.0));
    k = std::max(0ll, std::min<long long>(k, static_cast<long long>(cfg.regions) - 1));
    const double o = off[static_cast<std::size_t>(k)];
    if (row[j_swing] >= std::abs(o)) {
      p[i] = row[j_score] > 0.5 ? 1.0 : 0.0;
      continue;
    }
    const double rho = detail::p_s1_in_region(cfg, static_cast<std::size_t>(k));
    const double f1 = rho * detail::leak_density(row[j_leak], 1, cfg.leak_noise);
    const double f0 = (1.0 - rho) * detail::leak_density(row[j_leak], 0, cfg.leak_noise);
    const double ps1 = f1 + f0 > 0.0 ? f1 / (f1 + f0) : rho;
    p[i] = o >= 0.0 ? ps1 : 1.0 - ps1;
  }
  return p;
}

}  // namespace road
