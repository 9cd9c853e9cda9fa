#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "road/dataset.hpp"
#include "road/errors.hpp"
#include "road/nn.hpp"
#include "road/trainers.hpp"

namespace road {

// %.17g survives a text round trip bit-for-bit for doubles.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Plain text network file: a layer-count line, then per layer a
// "dense IN OUT ACTIVATION" header, OUT weight rows and one bias row.
inline void save_model(const std::string& path, const DenseNetwork& net) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write '" + path + "'");
  out << "layers " << net.layers.size() << "\n";
  for (const auto& layer : net.layers) {
    out << "dense " << layer.W.cols << " " << layer.W.rows << " " << activation_name(layer.act)
        << "\n";
    for (std::size_t i = 0; i < layer.W.rows; ++i) {
      const double* row = layer.W.row(i);
      for (std::size_t j = 0; j < layer.W.cols; ++j)
        out << (j ? " " : "") << format_double(row[j]);
      out << "\n";
    }
    for (std::size_t j = 0; j < layer.b.size(); ++j)
      out << (j ? " " : "") << format_double(layer.b[j]);
    out << "\n";
  }
  if (!out) throw ParseError("write failed for '" + path + "'");
}

inline DenseNetwork load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  std::string word;
  std::size_t n_layers = 0;
  if (!(in >> word >> n_layers) || word != "layers")
    throw ParseError("'" + path + "': missing layer-count header");
  DenseNetwork net;
  for (std::size_t l = 0; l < n_layers; ++l) {
    std::size_t in_dim = 0, out_dim = 0;
    std::string act;
    if (!(in >> word >> in_dim >> out_dim >> act) || word != "dense")
      throw ParseError("'" + path + "': bad layer header at layer " + std::to_string(l));
    DenseLayer layer;
    layer.act = activation_from_name(act);
    layer.W = Matrix(out_dim, in_dim);
    layer.b.assign(out_dim, 0.0);
    for (double& v : layer.W.a)
      if (!(in >> v)) throw ParseError("'" + path + "': truncated weights at layer " + std::to_string(l));
    for (double& v : layer.b)
      if (!(in >> v)) throw ParseError("'" + path + "': truncated biases at layer " + std::to_string(l));
    net.layers.push_back(std::move(layer));
  }
  if (net.layers.empty()) throw ParseError("'" + path + "': no layers");
  return net;
}

inline nlohmann::json config_to_json(const TrainConfig& cfg, bool tau_floored) {
  nlohmann::json j;
  j["algorithm"] = algorithm_name(cfg.algo);
  j["mode"] = mode_name(cfg.mode);
  j["norm"] = norm_name(cfg.norm);
  j["lambda"] = cfg.lambda_g;
  j["tau"] = cfg.tau;
  j["tau_floored"] = tau_floored;
  j["lr_f"] = cfg.lr_f;
  j["lr_g"] = cfg.lr_g;
  j["lr_r"] = cfg.lr_r;
  j["n_g"] = cfg.n_g;
  j["n_r"] = cfg.n_r;
  j["batch_size"] = cfg.batch_size;
  j["epochs"] = cfg.epochs;
  j["seed"] = cfg.seed;
  j["f_hidden"] = cfg.f_hidden;
  j["g_hidden"] = cfg.g_hidden;
  j["h_hidden"] = cfg.h_hidden;
  return j;
}

inline TrainConfig config_from_json(const nlohmann::json& j) {
  TrainConfig cfg;
  cfg.algo = algorithm_from_name(j.at("algorithm").get<std::string>());
  cfg.mode = mode_from_name(j.at("mode").get<std::string>());
  cfg.norm = norm_from_name(j.at("norm").get<std::string>());
  cfg.lambda_g = j.at("lambda").get<double>();
  cfg.tau = j.at("tau").get<double>();
  cfg.lr_f = j.at("lr_f").get<double>();
  cfg.lr_g = j.at("lr_g").get<double>();
  cfg.lr_r = j.at("lr_r").get<double>();
  cfg.n_g = j.at("n_g").get<int>();
  cfg.n_r = j.at("n_r").get<int>();
  cfg.batch_size = j.at("batch_size").get<int>();
  cfg.epochs = j.at("epochs").get<int>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.f_hidden = j.at("f_hidden").get<std::vector<std::size_t>>();
  cfg.g_hidden = j.at("g_hidden").get<std::vector<std::size_t>>();
  cfg.h_hidden = j.at("h_hidden").get<std::vector<std::size_t>>();
  return cfg;
}

// Sidecar carrying everything needed to reuse a saved predictor on new data:
// the input schema, the standardization fitted on its training set, and the
// resolved training configuration.
struct ModelMeta {
  std::vector<std::string> feature_names;
  std::string label_name;
  std::string sensitive_name;
  Standardizer standardizer;
  nlohmann::json config;
};

inline void save_meta(const std::string& path, const ModelMeta& meta) {
  nlohmann::json j;
  j["feature_names"] = meta.feature_names;
  j["label"] = meta.label_name;
  j["sensitive"] = meta.sensitive_name;
  j["standardizer"]["mean"] = meta.standardizer.mean;
  j["standardizer"]["stddev"] = meta.standardizer.stddev;
  j["config"] = meta.config;
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write '" + path + "'");
  out << j.dump(2) << "\n";
}

inline ModelMeta load_meta(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ParseError("'" + path + "': " + e.what());
  }
  ModelMeta meta;
  meta.feature_names = j.at("feature_names").get<std::vector<std::string>>();
  meta.label_name = j.at("label").get<std::string>();
  meta.sensitive_name = j.at("sensitive").get<std::string>();
  meta.standardizer.mean = j.at("standardizer").at("mean").get<std::vector<double>>();
  meta.standardizer.stddev = j.at("standardizer").at("stddev").get<std::vector<double>>();
  meta.config = j.at("config");
  return meta;
}

// CSV writer matching load_csv: features in order, then label and sensitive.
inline void write_csv(const std::string& path, const Dataset& ds) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write '" + path + "'");
  for (const auto& name : ds.feature_names) out << name << ",";
  out << ds.label_name << "," << ds.sensitive_name << "\n";
  for (std::size_t i = 0; i < ds.n(); ++i) {
    const double* row = ds.X.row(i);
    for (std::size_t j = 0; j < ds.dim(); ++j) out << format_double(row[j]) << ",";
    out << ds.y[i] << "," << ds.s[i] << "\n";
  }
  if (!out) throw ParseError("write failed for '" + path + "'");
}

}  // namespace road
