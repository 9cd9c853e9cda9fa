#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "road/dataset.hpp"
#include "road/errors.hpp"
#include "road/metrics.hpp"
#include "road/model_io.hpp"
#include "road/trainers.hpp"

namespace road {

inline std::vector<double> linspace(double lo, double hi, std::size_t count) {
  if (count == 0) throw ConfigError("linspace: empty grid");
  if (count == 1) return {lo};
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i)
    out[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
  return out;
}

inline std::vector<double> logspace(double lo, double hi, std::size_t count) {
  if (!(lo > 0.0 && hi > 0.0)) throw ConfigError("logspace: bounds must be positive");
  if (count == 0) throw ConfigError("logspace: empty grid");
  if (count == 1) return {lo};
  std::vector<double> out(count);
  const double llo = std::log(lo), lhi = std::log(hi);
  for (std::size_t i = 0; i < count; ++i)
    out[i] = std::exp(llo + (lhi - llo) * static_cast<double>(i) / static_cast<double>(count - 1));
  return out;
}

inline std::vector<double> default_lambda_grid() { return linspace(0.0, 5.0, 20); }
inline std::vector<double> default_tau_grid() { return linspace(0.001, 1.0, 10); }

struct SweepSpec {
  std::vector<Algorithm> algos = {Algorithm::Biased, Algorithm::GlobalFair, Algorithm::Road,
                                  Algorithm::Broad};
  std::vector<double> lambdas = default_lambda_grid();
  std::vector<double> taus = default_tau_grid();
  std::vector<std::uint64_t> seeds = {0};
  TrainConfig base;  // mode, norm, learning rates, epochs... shared across cells
  SubgroupSpec subgroups;
  double test_frac = 0.3;
  int jobs = 1;
};

struct SweepCell {
  std::string id;
  Algorithm algo;
  double lambda = 0.0;
  double tau = 0.0;
  std::uint64_t seed = 0;
};

inline std::string format_grid_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

inline std::string cell_id(Algorithm algo, FairnessMode mode, NormMode norm, double lambda,
                           double tau, std::uint64_t seed) {
  std::ostringstream id;
  id << algorithm_name(algo) << "_" << mode_name(mode) << "_" << norm_name(norm) << "_l"
     << format_grid_value(lambda) << "_t" << format_grid_value(tau) << "_s" << seed;
  return id.str();
}

// Grid expansion: the penalty-free baseline has one cell per seed, the
// uniform-weight algorithm sweeps lambda, the reweighted ones sweep both.
inline std::vector<SweepCell> enumerate_cells(const SweepSpec& spec) {
  if (spec.algos.empty()) throw ConfigError("sweep: no algorithms");
  if (spec.seeds.empty()) throw ConfigError("sweep: no seeds");
  std::vector<SweepCell> cells;
  for (Algorithm algo : spec.algos) {
    const bool uses_lambda = algo != Algorithm::Biased;
    const bool uses_tau = algo == Algorithm::Road || algo == Algorithm::Broad;
    const std::vector<double> lam = uses_lambda ? spec.lambdas : std::vector<double>{0.0};
    const std::vector<double> tau = uses_tau ? spec.taus : std::vector<double>{0.0};
    if (uses_lambda && spec.lambdas.empty()) throw ConfigError("sweep: empty lambda grid");
    if (uses_tau && spec.taus.empty()) throw ConfigError("sweep: empty tau grid");
    for (std::uint64_t seed : spec.seeds)
      for (double l : lam)
        for (double t : tau)
          cells.push_back({cell_id(algo, spec.base.mode, spec.base.norm, l, t, seed), algo, l, t,
                           seed});
  }
  return cells;
}

// Held-out evaluation of a trained model, with subgroups built on the raw
// (unstandardized) rows and ratio diagnostics from the trained weights.
inline RunReport evaluate_model(const TrainedModel& model, const Dataset& test_std,
                                const Dataset& test_raw, const SubgroupSpec& sub_spec,
                                std::size_t n_train) {
  RunReport rep;
  rep.config = config_to_json(model.cfg, model.tau_floored);
  rep.n_train = n_train;
  rep.n_test = test_std.n();

  const Predictions pred(forward_scores(model.f, test_std.X));
  rep.accuracy = accuracy(pred, test_std.y);
  rep.global_di = global_di(pred, test_std.s);
  rep.eo_gap = eo_gap(pred, test_std.y, test_std.s);

  const auto subgroups = build_subgroups(test_raw, sub_spec);
  const std::vector<double> r = eval_ratios(model, test_std);
  std::vector<double> dis;
  for (const auto& sg : subgroups) {
    const double di = local_di(pred, test_std.s, sg.idx);
    rep.local_di[sg.key] = di;
    dis.push_back(di);
    double mean_r = 0.0;
    for (std::size_t i : sg.idx) mean_r += r[i];
    rep.subgroup_mean_r[sg.key] = mean_r / static_cast<double>(sg.idx.size());
    rep.subgroup_size[sg.key] = sg.idx.size();
  }
  rep.worst1_di = worst_k_di(dis, 1);
  rep.worst3_di = worst_k_di(dis, 3);

  double mean = 0.0, sq = 0.0;
  for (double v : r) {
    mean += v;
    sq += v * v;
  }
  mean /= static_cast<double>(r.size());
  rep.r_mean = mean;
  rep.r_var = sq / static_cast<double>(r.size()) - mean * mean;
  rep.r_hist = ratio_histogram(r);

  if (!model.trace.empty()) {
    rep.train_loss_y = model.trace.back().loss_y;
    rep.train_loss_s = model.trace.back().loss_s;
  }
  return rep;
}

// Splits, standardizes, trains and evaluates one sweep cell. The split
// depends only on the seed, so every cell of a seed sees the same data and
// penalty-free runs are directly comparable across algorithms.
inline RunReport run_cell(const Dataset& raw, const SweepSpec& spec, const SweepCell& cell) {
  RngState split_rng(stream_seed(cell.seed, "split"));
  auto [train_raw, test_raw] = split(raw, spec.test_frac, split_rng);
  const Standardizer st = fit_standardizer(train_raw);
  Dataset train_std = train_raw;
  Dataset test_std = test_raw;
  st.apply(train_std);
  st.apply(test_std);

  TrainConfig cfg = spec.base;
  cfg.algo = cell.algo;
  cfg.lambda_g = cell.lambda;
  cfg.tau = cell.tau;
  cfg.seed = cell.seed;

  const auto t0 = std::chrono::steady_clock::now();
  const TrainedModel model = train(train_std, cfg);
  RunReport rep = evaluate_model(model, test_std, test_raw, spec.subgroups, train_std.n());
  rep.config["test_frac"] = spec.test_frac;
  rep.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                    .count();
  return rep;
}

inline std::vector<nlohmann::json> read_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  std::vector<nlohmann::json> out;
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (line.empty()) continue;
    try {
      out.push_back(nlohmann::json::parse(line));
    } catch (const std::exception& e) {
      throw ParseError(path + ":" + std::to_string(no) + ": " + e.what());
    }
  }
  return out;
}

struct SweepSummary {
  std::size_t total = 0;
  std::size_t ran = 0;
  std::size_t skipped = 0;
  std::size_t failed = 0;
};

// Runs every cell of the grid, appending one JSON line per finished cell.
// Restarting with the same output path skips cells that already have a
// successful record, so an interrupted sweep picks up where it stopped.
// With jobs > 1 cells run on a small thread pool; each cell is fully
// self-contained, so the records match the serial ones exactly.
inline SweepSummary run_sweep(const Dataset& raw, const SweepSpec& spec,
                              const std::string& out_path) {
  const std::vector<SweepCell> cells = enumerate_cells(spec);
  SweepSummary summary;
  summary.total = cells.size();

  std::set<std::string> done;
  bool needs_newline = false;
  {
    std::ifstream probe(out_path);
    if (probe) {
      std::string line;
      std::string last;
      while (std::getline(probe, line)) {
        last = line;
        if (line.empty()) continue;
        try {
          const auto j = nlohmann::json::parse(line);
          if (j.contains("cell_id") && !j.contains("error"))
            done.insert(j.at("cell_id").get<std::string>());
        } catch (const std::exception&) {
          // an interrupted write can leave a torn final line; ignore it
        }
      }
      probe.clear();
      probe.seekg(0, std::ios::end);
      const auto size = probe.tellg();
      if (size > 0) {
        probe.seekg(-1, std::ios::end);
        char c = 0;
        probe.get(c);
        needs_newline = c != '\n';
      }
    }
  }

  std::vector<const SweepCell*> todo;
  for (const auto& cell : cells) {
    if (done.count(cell.id)) {
      ++summary.skipped;
    } else {
      todo.push_back(&cell);
    }
  }

  std::ofstream out(out_path, std::ios::app);
  if (!out) throw ParseError("cannot write '" + out_path + "'");
  if (needs_newline) out << "\n";

  std::mutex mu;
  std::atomic<std::size_t> next{0};
  const int jobs = std::max(1, spec.jobs);
  auto worker = [&]() {
    for (;;) {
      const std::size_t at = next.fetch_add(1);
      if (at >= todo.size()) return;
      const SweepCell& cell = *todo[at];
      nlohmann::json line;
      bool ok = true;
      try {
        RunReport rep = run_cell(raw, spec, cell);
        line = rep.to_json();
        line["cell_id"] = cell.id;
      } catch (const std::exception& e) {
        line = {{"cell_id", cell.id}, {"error", e.what()}};
        ok = false;
      }
      std::lock_guard<std::mutex> lock(mu);
      out << line.dump() << "\n";
      out.flush();
      if (ok) {
        ++summary.ran;
      } else {
        ++summary.failed;
      }
    }
  };
  if (jobs == 1 || todo.size() <= 1) {
    worker();
  } else {
    const std::size_t n_threads = std::min<std::size_t>(static_cast<std::size_t>(jobs), todo.size());
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  return summary;
}

struct ParetoEntry {
  std::string cell_id;
  double worst1_di = 0.0;
  double accuracy = 0.0;
  double global_di = 0.0;
};

// Non-dominated (worst-subgroup disparity, accuracy) pairs among records
// whose overall disparity stays within the budget.
inline nlohmann::json pareto_report(const std::vector<nlohmann::json>& records, double di_budget) {
  std::vector<ParetoEntry> entries;
  for (const auto& rec : records) {
    if (rec.contains("error") || !rec.contains("worst1_di")) continue;
    if (rec.at("global_di").get<double>() > di_budget) continue;
    entries.push_back({rec.value("cell_id", std::string("?")), rec.at("worst1_di").get<double>(),
                       rec.at("accuracy").get<double>(), rec.at("global_di").get<double>()});
  }
  std::vector<ParetoPoint> pts;
  pts.reserve(entries.size());
  for (const auto& e : entries) pts.push_back({e.worst1_di, e.accuracy});
  const auto front = pareto_front(pts);

  nlohmann::json j;
  j["di_budget"] = di_budget;
  j["n_candidates"] = entries.size();
  j["front"] = nlohmann::json::array();
  for (std::size_t i : front) {
    j["front"].push_back({{"cell_id", entries[i].cell_id},
                          {"worst1_di", entries[i].worst1_di},
                          {"accuracy", entries[i].accuracy},
                          {"global_di", entries[i].global_di}});
  }
  return j;
}

// Re-applies a saved model to schema-identical datasets (e.g. progressively
// shifted versions of the training distribution) with the training-time
// standardization, and reports the same metric block for each.
inline nlohmann::json drift_eval(const DenseNetwork& f, const ModelMeta& meta,
                                 const std::vector<std::pair<std::string, Dataset>>& named_sets,
                                 const SubgroupSpec& sub_spec) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& [name, raw] : named_sets) {
    if (raw.feature_names != meta.feature_names)
      throw ConfigError("drift_eval: dataset '" + name + "' does not match the model schema");
    Dataset std_set = raw;
    meta.standardizer.apply(std_set);
    const Predictions pred(forward_scores(f, std_set.X));

    nlohmann::json row;
    row["set"] = name;
    row["n"] = raw.n();
    row["accuracy"] = accuracy(pred, std_set.y);
    row["global_di"] = global_di(pred, std_set.s);
    row["eo_gap"] = eo_gap(pred, std_set.y, std_set.s);
    const auto subgroups = build_subgroups(raw, sub_spec);
    std::vector<double> dis;
    nlohmann::json local = nlohmann::json::object();
    for (const auto& sg : subgroups) {
      const double di = local_di(pred, std_set.s, sg.idx);
      local[sg.key] = di;
      dis.push_back(di);
    }
    row["local_di"] = local;
    row["worst1_di"] = worst_k_di(dis, 1);
    row["worst3_di"] = worst_k_di(dis, 3);
    rows.push_back(row);
  }
  return rows;
}

// How the worst-subgroup picture changes as the subgroup definition varies:
// one row per (bin width, optional cross column).
inline nlohmann::json subgroup_sensitivity(const DenseNetwork& f, const ModelMeta& meta,
                                           const Dataset& raw, const std::string& bin_col,
                                           const std::vector<double>& widths,
                                           const std::vector<std::string>& cross_cols,
                                           std::size_t min_size) {
  if (raw.feature_names != meta.feature_names)
    throw ConfigError("subgroup_sensitivity: dataset does not match the model schema");
  Dataset std_set = raw;
  meta.standardizer.apply(std_set);
  const Predictions pred(forward_scores(f, std_set.X));

  std::vector<std::optional<std::string>> crosses;
  crosses.push_back(std::nullopt);
  for (const auto& c : cross_cols) crosses.push_back(c);

  nlohmann::json rows = nlohmann::json::array();
  for (double w : widths) {
    for (const auto& cross : crosses) {
      SubgroupSpec spec;
      spec.bin_col = bin_col;
      spec.bin_width = w;
      spec.cross_col = cross;
      spec.min_size = min_size;
      nlohmann::json row;
      row["bin_col"] = bin_col;
      row["bin_width"] = w;
      row["cross_col"] = cross ? *cross : "";
      try {
        const auto subgroups = build_subgroups(raw, spec);
        std::vector<double> dis;
        for (const auto& sg : subgroups) dis.push_back(local_di(pred, std_set.s, sg.idx));
        row["n_subgroups"] = subgroups.size();
        row["worst1_di"] = worst_k_di(dis, 1);
        row["worst3_di"] = worst_k_di(dis, 3);
      } catch (const ConfigError& e) {
        row["error"] = e.what();
      }
      rows.push_back(row);
    }
  }
  return rows;
}

namespace detail {

inline std::string plot_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

}  // namespace detail

// Flattens sweep records into plotting-friendly CSV tables.
// Kinds: pareto_xy, local_di_bars, r_histogram, tau_curve.
inline void emit_plotdata(const std::vector<nlohmann::json>& records, const std::string& kind,
                          const std::string& out_path, double di_budget = 1.0) {
  std::ofstream out(out_path);
  if (!out) throw ParseError("cannot write '" + out_path + "'");
  auto base_cols = [](const nlohmann::json& rec) {
    const auto& cfg = rec.at("config");
    std::ostringstream os;
    os << rec.value("cell_id", std::string("?")) << ","
       << cfg.at("algorithm").get<std::string>() << "," << detail::plot_num(cfg.at("lambda").get<double>())
       << "," << detail::plot_num(cfg.at("tau").get<double>()) << "," << cfg.at("seed").get<std::uint64_t>();
    return os.str();
  };

  std::vector<nlohmann::json> good;
  for (const auto& rec : records)
    if (!rec.contains("error") && rec.contains("worst1_di")) good.push_back(rec);

  if (kind == "pareto_xy") {
    std::vector<ParetoPoint> pts;
    std::vector<std::size_t> eligible;
    for (std::size_t i = 0; i < good.size(); ++i) {
      if (good[i].at("global_di").get<double>() <= di_budget) {
        eligible.push_back(i);
        pts.push_back({good[i].at("worst1_di").get<double>(), good[i].at("accuracy").get<double>()});
      }
    }
    std::set<std::size_t> on_front;
    for (std::size_t k : pareto_front(pts)) on_front.insert(eligible[k]);
    out << "cell_id,algorithm,lambda,tau,seed,worst1_di,accuracy,global_di,on_front\n";
    for (std::size_t i = 0; i < good.size(); ++i) {
      out << base_cols(good[i]) << "," << detail::plot_num(good[i].at("worst1_di").get<double>())
          << "," << detail::plot_num(good[i].at("accuracy").get<double>()) << ","
          << detail::plot_num(good[i].at("global_di").get<double>()) << ","
          << (on_front.count(i) ? 1 : 0) << "\n";
    }
  } else if (kind == "local_di_bars") {
    out << "cell_id,algorithm,lambda,tau,seed,subgroup,local_di,mean_r,size\n";
    for (const auto& rec : good) {
      const auto& local = rec.at("local_di");
      const auto& mean_r = rec.at("subgroup_mean_r");
      const auto& size = rec.at("subgroup_size");
      for (auto it = local.begin(); it != local.end(); ++it) {
        out << base_cols(rec) << ",\"" << it.key() << "\","
            << detail::plot_num(it.value().get<double>()) << ","
            << detail::plot_num(mean_r.at(it.key()).get<double>()) << ","
            << size.at(it.key()).get<std::size_t>() << "\n";
      }
    }
  } else if (kind == "r_histogram") {
    out << "cell_id,algorithm,lambda,tau,seed,bin_lo,bin_hi,count\n";
    for (const auto& rec : good) {
      const auto hist = rec.at("r_hist").get<std::vector<std::size_t>>();
      for (std::size_t b = 0; b < hist.size(); ++b) {
        const double lo = 0.1 * static_cast<double>(b);
        out << base_cols(rec) << "," << detail::plot_num(lo) << ",";
        if (b + 1 == hist.size()) {
          out << "inf";
        } else {
          out << detail::plot_num(lo + 0.1);
        }
        out << "," << hist[b] << "\n";
      }
    }
  } else if (kind == "tau_curve") {
    out << "cell_id,algorithm,lambda,tau,seed,worst1_di,accuracy,global_di\n";
    std::vector<const nlohmann::json*> rows;
    for (const auto& rec : good) {
      const std::string algo = rec.at("config").at("algorithm").get<std::string>();
      if (algo == "road" || algo == "broad") rows.push_back(&rec);
    }
    std::stable_sort(rows.begin(), rows.end(), [](const nlohmann::json* a, const nlohmann::json* b) {
      return a->at("config").at("tau").get<double>() < b->at("config").at("tau").get<double>();
    });
    for (const auto* rec : rows) {
      out << base_cols(*rec) << "," << detail::plot_num(rec->at("worst1_di").get<double>()) << ","
          << detail::plot_num(rec->at("accuracy").get<double>()) << ","
          << detail::plot_num(rec->at("global_di").get<double>()) << "\n";
    }
  } else {
    throw ConfigError("emit_plotdata: unknown kind '" + kind + "'");
  }
}

}  // namespace road
