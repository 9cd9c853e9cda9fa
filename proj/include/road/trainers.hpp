#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "road/dataset.hpp"
#include "road/errors.hpp"
#include "road/nn.hpp"
#include "road/ratio.hpp"
#include "road/rng.hpp"

namespace road {

enum class Algorithm { Biased, GlobalFair, Road, Broad };
enum class FairnessMode { DP, EO };

inline const char* algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::Biased: return "biased";
    case Algorithm::GlobalFair: return "globalfair";
    case Algorithm::Road: return "road";
    case Algorithm::Broad: return "broad";
  }
  return "?";
}

inline Algorithm algorithm_from_name(const std::string& s) {
  if (s == "biased") return Algorithm::Biased;
  if (s == "globalfair") return Algorithm::GlobalFair;
  if (s == "road") return Algorithm::Road;
  if (s == "broad") return Algorithm::Broad;
  throw ConfigError("unknown algorithm: " + s);
}

inline const char* mode_name(FairnessMode m) { return m == FairnessMode::DP ? "dp" : "eo"; }

inline FairnessMode mode_from_name(const std::string& s) {
  if (s == "dp") return FairnessMode::DP;
  if (s == "eo") return FairnessMode::EO;
  throw ConfigError("unknown fairness mode: " + s);
}

inline const char* norm_name(NormMode m) {
  return m == NormMode::Conditional ? "conditional" : "global";
}

inline NormMode norm_from_name(const std::string& s) {
  if (s == "conditional") return NormMode::Conditional;
  if (s == "global") return NormMode::Global;
  throw ConfigError("unknown normalization mode: " + s);
}

struct TrainConfig {
  Algorithm algo = Algorithm::Road;
  FairnessMode mode = FairnessMode::DP;
  NormMode norm = NormMode::Conditional;
  double lambda_g = 1.0;
  double tau = 0.5;
  double lr_f = 0.01;
  double lr_g = 0.01;
  double lr_r = 0.01;
  int n_g = 5;  // adversary steps per batch
  int n_r = 5;  // ratio steps per batch
  int batch_size = 128;
  int epochs = 200;
  std::uint64_t seed = 0;
  std::vector<std::size_t> f_hidden = {64, 32};
  std::vector<std::size_t> g_hidden = {64, 32, 16};
  std::vector<std::size_t> h_hidden = {64, 32};
};

struct EpochStats {
  double loss_y = 0.0;  // mean prediction loss over the epoch
  double loss_s = 0.0;  // mean (unweighted) adversary loss
  double r_mean = 1.0;
  double r_var = 0.0;
};

struct TrainedModel {
  DenseNetwork f;
  std::optional<DenseNetwork> g;  // sensitive adversary, when the algorithm has one
  std::optional<DenseNetwork> h;  // ratio network (three-player variant only)
  TrainConfig cfg;                // resolved values actually used
  bool tau_floored = false;
  std::vector<EpochStats> trace;
};

struct TrainHooks {
  // phase is "g", "r" or "f"; fired once per individual update step
  std::function<void(const char* phase, int epoch, int batch)> on_phase;
  // the weights used by the predictor update of this batch
  std::function<void(int epoch, int batch, const std::vector<double>& r,
                     const std::vector<int>& s)>
      on_ratios;
  std::function<void(const DenseNetwork& f)> after_f_step;
  std::function<void(int epoch, int batch, const DenseNetwork& f, const DenseNetwork* g,
                     const DenseNetwork* h)>
      after_batch;
};

// What the adversary sees: the predictor score, plus the true label when
// matching equalized odds (the label lets it model class-conditional rates).
inline Matrix adversary_input(const std::vector<double>& scores, const std::vector<int>& y,
                              FairnessMode mode) {
  if (mode == FairnessMode::EO && scores.size() != y.size())
    throw NumericError("adversary_input: size mismatch");
  Matrix in(scores.size(), mode == FairnessMode::DP ? 1 : 2);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    in(i, 0) = scores[i];
    if (mode == FairnessMode::EO) in(i, 1) = static_cast<double>(y[i]);
  }
  return in;
}

// One descent step of the adversary on its own objective, the plain mean
// BCE of reconstructing s. Returns that loss before the step.
inline double adversary_step(DenseNetwork& g, const Matrix& adv_in, const std::vector<int>& s,
                             double lr) {
  ForwardTrace tr;
  const std::vector<double> p = forward_scores(g, adv_in, &tr);
  const BceResult bce = binary_cross_entropy(p, s);
  Matrix d_out(p.size(), 1);
  for (std::size_t i = 0; i < p.size(); ++i) d_out(i, 0) = bce.d_mean_dp[i];
  sgd_step(g, backward(g, tr, d_out), lr);
  return bce.mean;
}

// Ratio objective for the current weights: mean(r L) + tau * mean(r log r).
// Minimizing this over valid r is the inner maximization of the relaxed
// worst-case objective, so the ratio player descends it.
inline double ratio_objective(const std::vector<double>& r, const std::vector<double>& loss_s,
                              double tau) {
  double acc = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) acc += r[i] * loss_s[i];
  return acc / static_cast<double>(r.size()) + tau * kl_term(r);
}

// One descent step of the ratio network on the fixed per-sample adversary
// losses. Gradients flow through the per-group exp-mean normalization.
// Returns the objective before the step.
inline double ratio_step(DenseNetwork& h, const Matrix& h_in, const std::vector<int>& s,
                         const std::vector<double>& loss_s, double tau, NormMode norm, double lr) {
  ForwardTrace tr;
  const std::vector<double> scores = forward_scores(h, h_in, &tr);
  const std::vector<double> r = normalize(scores, s, norm);
  const double n = static_cast<double>(r.size());
  std::vector<double> dJ_dr(r.size());
  for (std::size_t i = 0; i < r.size(); ++i)
    dJ_dr[i] = (loss_s[i] + tau * (1.0 + std::log(r[i]))) / n;
  const std::vector<double> dh = normalize_backward(r, s, dJ_dr, norm);
  Matrix d_out(dh.size(), 1);
  for (std::size_t i = 0; i < dh.size(); ++i) d_out(i, 0) = dh[i];
  sgd_step(h, backward(h, tr, d_out), lr);
  return ratio_objective(r, loss_s, tau);
}

struct PredictorStepInfo {
  double loss_y = 0.0;           // mean BCE against labels
  double loss_s_weighted = 0.0;  // mean(r * adversary loss), the penalized part
};

// Predictor update on J_f = mean L_y - lambda * mean(r L_s), with the
// weights r and the adversary parameters held fixed. The fairness term
// reaches f through the adversary's input gradient (column 0 of d adv_in);
// the adversary's own parameter gradients are computed and discarded.
inline PredictorStepInfo predictor_step(DenseNetwork& f, const Matrix& X,
                                        const std::vector<int>& y, const DenseNetwork* g,
                                        const std::vector<int>& s, const std::vector<double>* r,
                                        double lambda, FairnessMode mode, double lr) {
  ForwardTrace tr_f;
  const std::vector<double> p_f = forward_scores(f, X, &tr_f);
  const BceResult bce_y = binary_cross_entropy(p_f, y);
  std::vector<double> dp(bce_y.d_mean_dp);

  PredictorStepInfo info;
  info.loss_y = bce_y.mean;
  if (g) {
    const Matrix adv_in = adversary_input(p_f, y, mode);
    ForwardTrace tr_g;
    const std::vector<double> p_g = forward_scores(*g, adv_in, &tr_g);
    const BceResult bce_s = binary_cross_entropy(p_g, s, r);
    info.loss_s_weighted = bce_s.mean;
    if (lambda != 0.0) {
      Matrix d_out_g(p_g.size(), 1);
      for (std::size_t i = 0; i < p_g.size(); ++i) d_out_g(i, 0) = -lambda * bce_s.d_mean_dp[i];
      Matrix d_adv_in;
      backward(*g, tr_g, d_out_g, &d_adv_in);  // parameter gradients discarded
      for (std::size_t i = 0; i < p_f.size(); ++i) dp[i] += d_adv_in(i, 0);
    }
  }

  Matrix d_out_f(p_f.size(), 1);
  for (std::size_t i = 0; i < p_f.size(); ++i) d_out_f(i, 0) = dp[i];
  sgd_step(f, backward(f, tr_f, d_out_f), lr);
  return info;
}

namespace detail {

inline std::vector<LayerSpec> stack_specs(std::size_t in, const std::vector<std::size_t>& hidden,
                                          Activation head) {
  std::vector<LayerSpec> specs;
  std::size_t prev = in;
  for (std::size_t hdim : hidden) {
    specs.push_back({prev, hdim, Activation::ReLU});
    prev = hdim;
  }
  specs.push_back({prev, 1, head});
  return specs;
}

inline Matrix ratio_input(const Matrix& X, const std::vector<int>& s) {
  Matrix in(X.rows, X.cols + 1);
  for (std::size_t i = 0; i < X.rows; ++i) {
    const double* src = X.row(i);
    double* dst = in.row(i);
    for (std::size_t j = 0; j < X.cols; ++j) dst[j] = src[j];
    dst[X.cols] = static_cast<double>(s[i]);
  }
  return in;
}

}  // namespace detail

constexpr double kTauFloor = 1e-3;

// Validates and fills in derived pieces; tau = 0 is floored to a small
// positive value (the closed-form weights and the entropy term need tau > 0)
// and the substitution is reported back through TrainedModel::tau_floored.
inline TrainConfig resolve_config(TrainConfig cfg, bool* tau_floored = nullptr) {
  if (cfg.lambda_g < 0.0) throw ConfigError("lambda must be non-negative");
  if (cfg.batch_size <= 0) throw ConfigError("batch_size must be positive");
  if (cfg.epochs < 0) throw ConfigError("epochs must be non-negative");
  if (cfg.n_g < 0 || cfg.n_r < 0) throw ConfigError("n_g and n_r must be non-negative");
  if (cfg.lr_f < 0.0 || cfg.lr_g < 0.0 || cfg.lr_r < 0.0)
    throw ConfigError("learning rates must be non-negative");
  bool floored = false;
  if (cfg.algo == Algorithm::Road || cfg.algo == Algorithm::Broad) {
    if (cfg.tau < 0.0) throw ConfigError("tau must be non-negative");
    if (cfg.tau == 0.0) {
      cfg.tau = kTauFloor;
      floored = true;
    }
  }
  if (tau_floored) *tau_floored = floored;
  return cfg;
}

inline TrainedModel train(const Dataset& train_set, const TrainConfig& raw_cfg,
                          const TrainHooks* hooks = nullptr) {
  bool tau_floored = false;
  const TrainConfig cfg = resolve_config(raw_cfg, &tau_floored);
  if (train_set.n() == 0) throw ConfigError("train: empty dataset");

  const bool has_g = cfg.algo != Algorithm::Biased;
  const bool has_h = cfg.algo == Algorithm::Road;
  const std::size_t d = train_set.dim();

  TrainedModel model;
  model.cfg = cfg;
  model.tau_floored = tau_floored;
  {
    RngState rng(stream_seed(cfg.seed, "f-init"));
    model.f = init_network(detail::stack_specs(d, cfg.f_hidden, Activation::Sigmoid), rng);
  }
  if (has_g) {
    RngState rng(stream_seed(cfg.seed, "g-init"));
    const std::size_t g_in = cfg.mode == FairnessMode::DP ? 1 : 2;
    model.g = init_network(detail::stack_specs(g_in, cfg.g_hidden, Activation::Sigmoid), rng);
  }
  if (has_h) {
    RngState rng(stream_seed(cfg.seed, "h-init"));
    model.h = init_network(detail::stack_specs(d + 1, cfg.h_hidden, Activation::Identity), rng);
  }

  RngState rng_batch(stream_seed(cfg.seed, "batch"));

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto batches = iterate_batches(train_set, static_cast<std::size_t>(cfg.batch_size),
                                         rng_batch);
    EpochStats stats;
    stats.r_mean = 0.0;
    double w_total = 0.0, r_sq = 0.0;
    int bi = 0;
    for (const Batch& batch : batches) {
      const double bn = static_cast<double>(batch.y.size());
      if (!has_g) {
        const PredictorStepInfo info =
            predictor_step(model.f, batch.X, batch.y, nullptr, batch.s, nullptr, 0.0, cfg.mode,
                           cfg.lr_f);
        if (hooks && hooks->on_phase) hooks->on_phase("f", epoch, bi);
        if (hooks && hooks->after_f_step) hooks->after_f_step(model.f);
        stats.loss_y += bn * info.loss_y;
        w_total += bn;
      } else {
        const std::vector<double> p_f = forward_scores(model.f, batch.X);
        const Matrix adv_in = adversary_input(p_f, batch.y, cfg.mode);
        for (int t = 0; t < cfg.n_g; ++t) {
          adversary_step(*model.g, adv_in, batch.s, cfg.lr_g);
          if (hooks && hooks->on_phase) hooks->on_phase("g", epoch, bi);
        }
        const std::vector<double> p_g = forward_scores(*model.g, adv_in);
        const BceResult bce_s = binary_cross_entropy(p_g, batch.s);

        std::vector<double> r(batch.y.size(), 1.0);
        if (cfg.algo == Algorithm::Road) {
          const Matrix h_in = detail::ratio_input(batch.X, batch.s);
          for (int t = 0; t < cfg.n_r; ++t) {
            ratio_step(*model.h, h_in, batch.s, bce_s.per_sample, cfg.tau, cfg.norm, cfg.lr_r);
            if (hooks && hooks->on_phase) hooks->on_phase("r", epoch, bi);
          }
          r = normalize(forward_scores(*model.h, h_in), batch.s, cfg.norm);
        } else if (cfg.algo == Algorithm::Broad) {
          r = broad_weights(bce_s.per_sample, batch.s, cfg.tau, cfg.norm);
        }
        if (hooks && hooks->on_ratios) hooks->on_ratios(epoch, bi, r, batch.s);

        const PredictorStepInfo info =
            predictor_step(model.f, batch.X, batch.y, &*model.g, batch.s, &r, cfg.lambda_g,
                           cfg.mode, cfg.lr_f);
        if (hooks && hooks->on_phase) hooks->on_phase("f", epoch, bi);
        if (hooks && hooks->after_f_step) hooks->after_f_step(model.f);

        stats.loss_y += bn * info.loss_y;
        stats.loss_s += bn * bce_s.mean;
        for (double v : r) {
          stats.r_mean += v;
          r_sq += v * v;
        }
        w_total += bn;
      }
      if (hooks && hooks->after_batch)
        hooks->after_batch(epoch, bi, model.f, has_g ? &*model.g : nullptr,
                           has_h ? &*model.h : nullptr);
      ++bi;
    }
    if (w_total > 0.0) {
      stats.loss_y /= w_total;
      stats.loss_s /= w_total;
      if (has_g) {
        stats.r_mean /= w_total;
        stats.r_var = r_sq / w_total - stats.r_mean * stats.r_mean;
      } else {
        stats.r_mean = 1.0;
      }
    }
    model.trace.push_back(stats);
  }
  return model;
}

inline TrainedModel train_biased(const Dataset& ds, TrainConfig cfg, const TrainHooks* hooks = nullptr) {
  cfg.algo = Algorithm::Biased;
  return train(ds, cfg, hooks);
}

inline TrainedModel train_global_fair(const Dataset& ds, TrainConfig cfg,
                                      const TrainHooks* hooks = nullptr) {
  cfg.algo = Algorithm::GlobalFair;
  return train(ds, cfg, hooks);
}

inline TrainedModel train_road(const Dataset& ds, TrainConfig cfg, const TrainHooks* hooks = nullptr) {
  cfg.algo = Algorithm::Road;
  return train(ds, cfg, hooks);
}

inline TrainedModel train_broad(const Dataset& ds, TrainConfig cfg, const TrainHooks* hooks = nullptr) {
  cfg.algo = Algorithm::Broad;
  return train(ds, cfg, hooks);
}

// Ratio weights a trained model assigns to a held-out set: the three-player
// variant reads its ratio network, the closed-form variant rebuilds weights
// from the adversary's losses, and the others weight everyone equally.
inline std::vector<double> eval_ratios(const TrainedModel& model, const Dataset& ds) {
  std::vector<double> r(ds.n(), 1.0);
  if (model.cfg.algo == Algorithm::Road && model.h) {
    const Matrix h_in = detail::ratio_input(ds.X, ds.s);
    r = normalize(forward_scores(*model.h, h_in), ds.s, model.cfg.norm);
  } else if (model.cfg.algo == Algorithm::Broad && model.g) {
    const std::vector<double> p_f = forward_scores(model.f, ds.X);
    const Matrix adv_in = adversary_input(p_f, ds.y, model.cfg.mode);
    const std::vector<double> p_g = forward_scores(*model.g, adv_in);
    const BceResult bce_s = binary_cross_entropy(p_g, ds.s);
    r = broad_weights(bce_s.per_sample, ds.s, model.cfg.tau, model.cfg.norm);
  }
  return r;
}

}  // namespace road
