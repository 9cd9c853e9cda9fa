#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "road/errors.hpp"
#include "road/matrix.hpp"
#include "road/rng.hpp"

namespace road {

enum class Activation { ReLU, Sigmoid, Identity };

inline const char* activation_name(Activation a) {
  switch (a) {
    case Activation::ReLU: return "relu";
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Identity: return "identity";
  }
  return "?";
}

inline Activation activation_from_name(const std::string& s) {
  if (s == "relu") return Activation::ReLU;
  if (s == "sigmoid") return Activation::Sigmoid;
  if (s == "identity") return Activation::Identity;
  throw ParseError("unknown activation: " + s);
}

struct LayerSpec {
  std::size_t in = 0;
  std::size_t out = 0;
  Activation act = Activation::ReLU;
};

struct DenseLayer {
  Matrix W;               // out x in
  std::vector<double> b;  // out
  Activation act = Activation::ReLU;
};

struct DenseNetwork {
  std::vector<DenseLayer> layers;

  std::size_t input_dim() const { return layers.front().W.cols; }
  std::size_t output_dim() const { return layers.back().W.rows; }
};

struct GradientSet {
  std::vector<Matrix> dW;
  std::vector<std::vector<double>> db;
};

// Activations plus pre-activations per layer; backward replays these.
struct ForwardTrace {
  Matrix input;
  std::vector<Matrix> z;  // pre-activation per layer
  std::vector<Matrix> a;  // post-activation per layer
};

// Glorot/Xavier uniform on [-b, b] with b = sqrt(6 / (fan_in + fan_out)),
// biases zero. Draw order is fixed (layer by layer, row-major) so a given
// seed always yields the same parameters.
inline DenseNetwork init_network(const std::vector<LayerSpec>& specs, RngState& rng) {
  if (specs.empty()) throw ConfigError("init_network: empty layer list");
  for (std::size_t l = 0; l < specs.size(); ++l) {
    if (specs[l].in == 0 || specs[l].out == 0)
      throw ConfigError("init_network: zero-sized layer " + std::to_string(l));
    if (l > 0 && specs[l].in != specs[l - 1].out)
      throw ConfigError("init_network: layer " + std::to_string(l) + " expects input " +
                        std::to_string(specs[l].in) + " but previous layer outputs " +
                        std::to_string(specs[l - 1].out));
  }
  DenseNetwork net;
  net.layers.reserve(specs.size());
  for (const auto& sp : specs) {
    DenseLayer layer;
    layer.W = Matrix(sp.out, sp.in);
    layer.b.assign(sp.out, 0.0);
    layer.act = sp.act;
    const double bound = std::sqrt(6.0 / static_cast<double>(sp.in + sp.out));
    for (double& w : layer.W.a) w = rng.uniform(-bound, bound);
    net.layers.push_back(std::move(layer));
  }
  return net;
}

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

inline void apply_activation(Activation act, const Matrix& z, Matrix& out) {
  out = z;
  switch (act) {
    case Activation::ReLU:
      for (double& v : out.a) v = v > 0.0 ? v : 0.0;
      break;
    case Activation::Sigmoid:
      for (double& v : out.a) v = sigmoid(v);
      break;
    case Activation::Identity:
      break;
  }
}

// Forward pass over a batch (rows are samples); keeps the trace for backward.
inline Matrix forward(const DenseNetwork& net, const Matrix& X, ForwardTrace* trace = nullptr) {
  if (X.cols != net.input_dim())
    throw NumericError("forward: input has " + std::to_string(X.cols) + " columns, network expects " +
                       std::to_string(net.input_dim()));
  if (trace) {
    trace->input = X;
    trace->z.clear();
    trace->a.clear();
    trace->z.reserve(net.layers.size());
    trace->a.reserve(net.layers.size());
  }
  Matrix cur = X;
  for (const auto& layer : net.layers) {
    Matrix z = matmul_nt(cur, layer.W);
    for (std::size_t i = 0; i < z.rows; ++i) {
      double* zi = z.row(i);
      for (std::size_t j = 0; j < z.cols; ++j) zi[j] += layer.b[j];
    }
    Matrix a;
    apply_activation(layer.act, z, a);
    if (trace) {
      trace->z.push_back(z);
      trace->a.push_back(a);
    }
    cur = std::move(a);
  }
  return cur;
}

// Convenience for single-output networks: returns the output column.
inline std::vector<double> forward_scores(const DenseNetwork& net, const Matrix& X,
                                          ForwardTrace* trace = nullptr) {
  Matrix out = forward(net, X, trace);
  if (out.cols != 1) throw NumericError("forward_scores: network output is not one-dimensional");
  return out.a;
}

// Reverse pass. d_out is dJ/d(output activations), same shape as the output.
// Returns exact parameter gradients; d_input (optional) receives dJ/dX, which
// the predictor step needs to route fairness gradients through the adversary.
// ReLU uses subgradient 0 at z == 0.
inline GradientSet backward(const DenseNetwork& net, const ForwardTrace& trace,
                            const Matrix& d_out, Matrix* d_input = nullptr) {
  const std::size_t L = net.layers.size();
  if (trace.z.size() != L || trace.a.size() != L)
    throw NumericError("backward: trace does not match network depth");
  if (!d_out.same_shape(trace.a.back()))
    throw NumericError("backward: output gradient shape mismatch");

  GradientSet g;
  g.dW.resize(L);
  g.db.resize(L);

  Matrix grad = d_out;  // dJ/d(a_l), walking backwards
  for (std::size_t l = L; l-- > 0;) {
    const DenseLayer& layer = net.layers[l];
    // dJ/dz = dJ/da * act'(z)
    Matrix dz = grad;
    switch (layer.act) {
      case Activation::ReLU:
        for (std::size_t i = 0; i < dz.a.size(); ++i)
          if (trace.z[l].a[i] <= 0.0) dz.a[i] = 0.0;
        break;
      case Activation::Sigmoid:
        for (std::size_t i = 0; i < dz.a.size(); ++i) {
          const double a = trace.a[l].a[i];
          dz.a[i] *= a * (1.0 - a);
        }
        break;
      case Activation::Identity:
        break;
    }
    const Matrix& prev = (l == 0) ? trace.input : trace.a[l - 1];
    g.dW[l] = matmul_tn(dz, prev);  // (out x n)*(n x in)
    g.db[l].assign(layer.W.rows, 0.0);
    for (std::size_t i = 0; i < dz.rows; ++i) {
      const double* di = dz.row(i);
      for (std::size_t j = 0; j < dz.cols; ++j) g.db[l][j] += di[j];
    }
    if (l > 0 || d_input) grad = matmul(dz, layer.W);  // dJ/d(a_{l-1})
  }
  if (d_input) *d_input = std::move(grad);
  return g;
}

inline void sgd_step(DenseNetwork& net, const GradientSet& g, double lr) {
  if (g.dW.size() != net.layers.size())
    throw NumericError("sgd_step: gradient set does not match network depth");
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    DenseLayer& layer = net.layers[l];
    if (!layer.W.same_shape(g.dW[l]) || layer.b.size() != g.db[l].size())
      throw NumericError("sgd_step: gradient shape mismatch at layer " + std::to_string(l));
    for (std::size_t i = 0; i < layer.W.a.size(); ++i) layer.W.a[i] -= lr * g.dW[l].a[i];
    for (std::size_t j = 0; j < layer.b.size(); ++j) layer.b[j] -= lr * g.db[l][j];
  }
}

constexpr double kBceClamp = 1e-7;

struct BceResult {
  double mean = 0.0;                // (1/n) sum_i w_i * loss_i
  std::vector<double> per_sample;   // unweighted loss_i
  std::vector<double> d_mean_dp;    // d(mean)/d(p_i), zero where p_i sits in the clamp
};

// Binary cross-entropy on probabilities, with logs clamped to [eps, 1-eps].
// Optional weights w enter the mean as (1/n) sum w_i loss_i; they are ratio
// weights already normalized to mean one, not a reweighted average.
inline BceResult binary_cross_entropy(const std::vector<double>& p, const std::vector<int>& t,
                                      const std::vector<double>* w = nullptr) {
  if (p.size() != t.size()) throw NumericError("binary_cross_entropy: size mismatch");
  if (w && w->size() != p.size()) throw NumericError("binary_cross_entropy: weight size mismatch");
  if (p.empty()) throw NumericError("binary_cross_entropy: empty batch");
  const std::size_t n = p.size();
  BceResult res;
  res.per_sample.resize(n);
  res.d_mean_dp.resize(n);
  const double lo = kBceClamp, hi = 1.0 - kBceClamp;
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const bool clamped = p[i] < lo || p[i] > hi;
    const double pc = p[i] < lo ? lo : (p[i] > hi ? hi : p[i]);
    const double ti = static_cast<double>(t[i]);
    const double loss = -(ti * std::log(pc) + (1.0 - ti) * std::log(1.0 - pc));
    const double wi = w ? (*w)[i] : 1.0;
    res.per_sample[i] = loss;
    acc += wi * loss;
    res.d_mean_dp[i] = clamped ? 0.0 : wi / static_cast<double>(n) * (pc - ti) / (pc * (1.0 - pc));
  }
  res.mean = acc / static_cast<double>(n);
  return res;
}

// Flat view of all parameters; finite-difference tests and checksums use this.
inline std::vector<double> flatten_params(const DenseNetwork& net) {
  std::vector<double> out;
  for (const auto& layer : net.layers) {
    out.insert(out.end(), layer.W.a.begin(), layer.W.a.end());
    out.insert(out.end(), layer.b.begin(), layer.b.end());
  }
  return out;
}

inline void unflatten_params(DenseNetwork& net, const std::vector<double>& flat) {
  std::size_t k = 0;
  for (auto& layer : net.layers) {
    for (double& w : layer.W.a) w = flat.at(k++);
    for (double& b : layer.b) b = flat.at(k++);
  }
  if (k != flat.size()) throw NumericError("unflatten_params: size mismatch");
}

inline std::vector<double> flatten_grads(const GradientSet& g) {
  std::vector<double> out;
  for (std::size_t l = 0; l < g.dW.size(); ++l) {
    out.insert(out.end(), g.dW[l].a.begin(), g.dW[l].a.end());
    out.insert(out.end(), g.db[l].begin(), g.db[l].end());
  }
  return out;
}

}  // namespace road
