#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "road/ratio.hpp"
#include "road/rng.hpp"
#include "support/oracles.hpp"

using namespace road;
using Catch::Approx;

TEST_CASE("equal scores normalize to weight one") {
  const std::vector<int> s{0, 1, 0, 1};
  for (double c : {0.0, -3.5, 40.0}) {
    const std::vector<double> h(4, c);
    for (double r : normalize_conditional(h, s)) REQUIRE(r == Approx(1.0));
    for (double r : normalize_global(h)) REQUIRE(r == Approx(1.0));
  }
}

TEST_CASE("two-point normalization has a closed form") {
  // e^0 = 1 and e^{ln 3} = 3; mean 2 => weights 0.5 and 1.5
  const std::vector<double> h{0.0, std::log(3.0)};
  const auto r = normalize_global(h);
  REQUIRE(r[0] == Approx(0.5));
  REQUIRE(r[1] == Approx(1.5));
}

TEST_CASE("normalization is invariant to per-group score shifts") {
  RngState rng(9);
  const std::vector<int> s{0, 0, 1, 1, 0, 1, 1, 0};
  std::vector<double> h(8);
  for (double& v : h) v = rng.uniform(-2.0, 2.0);
  const auto base = normalize_conditional(h, s);
  auto shifted = h;
  for (std::size_t i = 0; i < h.size(); ++i) shifted[i] += s[i] ? 123.0 : -77.0;
  const auto moved = normalize_conditional(shifted, s);
  for (std::size_t i = 0; i < h.size(); ++i) REQUIRE(moved[i] == Approx(base[i]).epsilon(1e-12));
}

TEST_CASE("huge scores do not overflow") {
  const std::vector<double> h{900.0, 850.0, -900.0};
  const std::vector<int> s{0, 0, 0};
  const auto r = normalize_conditional(h, s);
  for (double v : r) REQUIRE(std::isfinite(v));
  REQUIRE(r[0] > r[1]);
  REQUIRE(r[1] > r[2]);
}

TEST_CASE("group means stay at one across random batches") {
  RngState rng(1234);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(256);
    std::vector<double> h(n);
    std::vector<int> s(n);
    for (std::size_t i = 0; i < n; ++i) {
      h[i] = rng.normal(0.0, 2.0);
      s[i] = rng.uniform() < 0.4 ? 1 : 0;
    }
    const auto r = normalize_conditional(h, s);
    double sum[2] = {0, 0};
    std::size_t cnt[2] = {0, 0};
    for (std::size_t i = 0; i < n; ++i) {
      sum[s[i]] += r[i];
      ++cnt[s[i]];
    }
    for (int g = 0; g < 2; ++g)
      if (cnt[g] > 0) REQUIRE(std::abs(sum[g] / static_cast<double>(cnt[g]) - 1.0) < 1e-9);
    const auto rg = normalize_global(h);
    double total = 0.0;
    for (double v : rg) total += v;
    REQUIRE(std::abs(total / static_cast<double>(n) - 1.0) < 1e-9);
  }
}

TEST_CASE("conditional groups are independent of each other") {
  const std::vector<int> s{0, 0, 1, 1};
  std::vector<double> h{0.2, -0.4, 1.0, 2.0};
  const auto base = normalize_conditional(h, s);
  h[2] = -50.0;  // perturb only group 1
  h[3] = 3.0;
  const auto moved = normalize_conditional(h, s);
  REQUIRE(moved[0] == base[0]);
  REQUIRE(moved[1] == base[1]);
  REQUIRE(moved[2] != base[2]);
}

TEST_CASE("normalization backward matches finite differences") {
  RngState rng(77);
  for (NormMode mode : {NormMode::Conditional, NormMode::Global}) {
    for (int trial = 0; trial < 20; ++trial) {
      const std::size_t n = 2 + rng.below(12);
      std::vector<double> h(n), c(n);
      std::vector<int> s(n);
      for (std::size_t i = 0; i < n; ++i) {
        h[i] = rng.uniform(-2.0, 2.0);
        c[i] = rng.uniform(-1.0, 1.0);
        s[i] = rng.uniform() < 0.5 ? 1 : 0;
      }
      // J(h) = sum_i c_i r_i(h)^2, a smooth nonlinear probe
      auto J = [&](const std::vector<double>& hv) {
        const auto r = normalize(hv, s, mode);
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) acc += c[i] * r[i] * r[i];
        return acc;
      };
      const auto r = normalize(h, s, mode);
      std::vector<double> dJ_dr(n);
      for (std::size_t i = 0; i < n; ++i) dJ_dr[i] = 2.0 * c[i] * r[i];
      const auto analytic = normalize_backward(r, s, dJ_dr, mode);

      std::vector<double> fd(n);
      for (std::size_t k = 0; k < n; ++k) {
        const double step = 1e-6;
        auto hp = h, hm = h;
        hp[k] += step;
        hm[k] -= step;
        fd[k] = (J(hp) - J(hm)) / (2.0 * step);
      }
      REQUIRE(oracle::relative_error(fd, analytic) < 1e-6);
    }
  }
}

TEST_CASE("constant losses give uniform closed-form weights") {
  const std::vector<double> loss(6, 0.37);
  const std::vector<int> s{0, 1, 0, 1, 1, 0};
  for (NormMode mode : {NormMode::Conditional, NormMode::Global})
    for (double r : broad_weights(loss, s, 0.5, mode)) REQUIRE(r == Approx(1.0));
}

TEST_CASE("huge temperature flattens the closed-form weights") {
  const std::vector<double> loss{0.1, 2.0, 0.7, 1.4};
  const std::vector<int> s{0, 0, 1, 1};
  for (double r : broad_weights(loss, s, 1e6, NormMode::Conditional))
    REQUIRE(std::abs(r - 1.0) < 1e-3);
}

TEST_CASE("closed-form weights decrease in the loss within a group") {
  RngState rng(31);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 2 + rng.below(10);
    std::vector<double> loss(n);
    std::vector<int> s(n);
    for (std::size_t i = 0; i < n; ++i) {
      loss[i] = rng.uniform(0.0, 3.0);
      s[i] = rng.uniform() < 0.5 ? 1 : 0;
    }
    const auto r = broad_weights(loss, s, 0.7, NormMode::Conditional);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (s[i] == s[j] && loss[i] < loss[j]) REQUIRE(r[i] > r[j]);
  }
}

TEST_CASE("closed-form weights maximize the inner objective") {
  RngState rng(99);
  for (double tau : {0.1, 0.5, 1.0, 5.0}) {
    for (int trial = 0; trial < 10; ++trial) {
      const std::size_t n = 2 + rng.below(11);
      std::vector<double> loss(n);
      for (double& v : loss) v = rng.uniform(0.0, 4.0);
      const std::vector<int> s(n, 0);
      const auto r = broad_weights(loss, s, tau, NormMode::Global);
      const auto r_search = oracle::max_inner_objective(loss, tau);
      const double phi_closed = oracle::inner_objective(r, loss, tau);
      const double phi_search = oracle::inner_objective(r_search, loss, tau);
      REQUIRE(phi_closed >= phi_search - 1e-9);
      REQUIRE(std::abs(phi_closed - phi_search) < 1e-6);
    }
  }
}

TEST_CASE("closed-form weights satisfy the stationarity condition per pool") {
  // L_i + tau (1 + log r_i) should be constant inside each pool
  RngState rng(123);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 3 + rng.below(10);
    std::vector<double> loss(n);
    std::vector<int> s(n);
    for (std::size_t i = 0; i < n; ++i) {
      loss[i] = rng.uniform(0.0, 3.0);
      s[i] = rng.uniform() < 0.5 ? 1 : 0;
    }
    const double tau = 0.4;
    const auto r = broad_weights(loss, s, tau, NormMode::Conditional);
    double ref[2] = {0, 0};
    bool seen[2] = {false, false};
    for (std::size_t i = 0; i < n; ++i) {
      const double c = loss[i] + tau * (1.0 + std::log(r[i]));
      if (!seen[s[i]]) {
        ref[s[i]] = c;
        seen[s[i]] = true;
      } else {
        REQUIRE(c == Approx(ref[s[i]]).margin(1e-6));
      }
    }
  }
}

TEST_CASE("invalid ratio arguments are rejected") {
  const std::vector<double> loss{0.5, 0.7};
  const std::vector<int> s{0, 1};
  REQUIRE_THROWS_AS(broad_weights(loss, s, 0.0, NormMode::Global), NumericError);
  REQUIRE_THROWS_AS(broad_weights(loss, s, -1.0, NormMode::Global), NumericError);
  REQUIRE_THROWS_AS(broad_weights({}, {}, 1.0, NormMode::Global), NumericError);
  REQUIRE_THROWS_AS(normalize_conditional({1.0}, {0, 1}), NumericError);
  REQUIRE_THROWS_AS(kl_term({}), NumericError);
  REQUIRE_THROWS_AS(kl_term({-0.1, 2.1}), NumericError);
}

TEST_CASE("entropy penalty values") {
  REQUIRE(kl_term({1.0, 1.0, 1.0}) == 0.0);
  const double expected = 0.5 * (0.5 * std::log(0.5) + 1.5 * std::log(1.5));
  REQUIRE(kl_term({0.5, 1.5}) == Approx(expected));
  REQUIRE(kl_term({0.0, 2.0}) == Approx(std::log(2.0)));  // 0 log 0 = 0
  // any non-uniform mean-one vector pays a positive penalty
  RngState rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> h(6);
    for (double& v : h) v = rng.uniform(-1.0, 1.0);
    const auto r = normalize_global(h);
    double spread = 0.0;
    for (double v : r) spread += std::abs(v - 1.0);
    if (spread > 1e-9) REQUIRE(kl_term(r) > 0.0);
  }
}

TEST_CASE("weight concentration decreases as temperature rises") {
  const std::vector<double> loss{0.2, 0.9, 1.7, 0.4, 2.5};
  const std::vector<int> s(5, 0);
  double prev = 1e18;
  for (double tau : {0.05, 0.2, 1.0, 5.0}) {
    const double cur = kl_term(broad_weights(loss, s, tau, NormMode::Global));
    REQUIRE(cur <= prev);
    prev = cur;
  }
}

TEST_CASE("fully fair weights: conditional unity, global majority skew") {
  SECTION("balanced groups get weight one everywhere") {
    const auto w = fully_fair_weight_analysis(0.5, 1.0);
    REQUIRE(w.conditional_s1 == 1.0);
    REQUIRE(w.conditional_s0 == 1.0);
    REQUIRE(w.global_s1 == Approx(1.0));
    REQUIRE(w.global_s0 == Approx(1.0));
  }
  SECTION("documented example: 0.8 majority at tau 1") {
    const auto w = fully_fair_weight_analysis(0.8, 1.0);
    REQUIRE(w.global_s1 == Approx(0.8 / 0.68));
    REQUIRE(w.global_s0 == Approx(0.2 / 0.68));
  }
  SECTION("majority always weighs more under global normalization") {
    for (double p : {0.6, 0.75, 0.8, 0.95})
      for (double tau : {0.1, 0.5, 1.0, 5.0}) {
        const auto w = fully_fair_weight_analysis(p, tau);
        REQUIRE(w.global_s1 > w.global_s0);
        REQUIRE(w.conditional_s1 == 1.0);
        REQUIRE(w.conditional_s0 == 1.0);
      }
  }
  SECTION("closed-form weights on a base-rate batch reproduce the analysis") {
    // 8 of 10 samples in group 1, adversary loss = -log p(s_i)
    std::vector<int> s(10, 1);
    s[8] = s[9] = 0;
    std::vector<double> loss(10);
    for (std::size_t i = 0; i < 10; ++i) loss[i] = -std::log(s[i] ? 0.8 : 0.2);
    const auto w = fully_fair_weight_analysis(0.8, 1.0);
    const auto rg = broad_weights(loss, s, 1.0, NormMode::Global);
    const auto rc = broad_weights(loss, s, 1.0, NormMode::Conditional);
    for (std::size_t i = 0; i < 10; ++i) {
      REQUIRE(rg[i] == Approx(s[i] ? w.global_s1 : w.global_s0));
      REQUIRE(rc[i] == Approx(1.0));
    }
  }
  SECTION("domain checks") {
    REQUIRE_THROWS_AS(fully_fair_weight_analysis(0.0, 1.0), NumericError);
    REQUIRE_THROWS_AS(fully_fair_weight_analysis(1.0, 1.0), NumericError);
    REQUIRE_THROWS_AS(fully_fair_weight_analysis(0.5, 0.0), NumericError);
  }
}
