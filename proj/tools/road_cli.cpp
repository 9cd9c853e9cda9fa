// Command line front end: train single models, sweep hyperparameter grids,
// evaluate saved models on fresh or shifted data, and flatten sweep records
// into plot-ready tables.

#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "road/road.hpp"

namespace {

struct DataFlags {
  std::string path;
  std::string label = "outcome";
  std::string sensitive = "group";
};

struct SubgroupFlags {
  std::string bin_col = "age";
  double bin_width = 10.0;
  std::string cross_col;
  std::size_t min_size = 30;
};

void add_data_flags(CLI::App* cmd, DataFlags& flags, bool required = true) {
  auto* opt = cmd->add_option("--data", flags.path, "input CSV with a header row");
  if (required) opt->required();
  cmd->add_option("--label", flags.label, "label column name");
  cmd->add_option("--sensitive", flags.sensitive, "sensitive attribute column name");
}

void add_subgroup_flags(CLI::App* cmd, SubgroupFlags& flags) {
  cmd->add_option("--bin-col", flags.bin_col, "feature column to bin into subgroups");
  cmd->add_option("--bin-width", flags.bin_width, "subgroup bin width");
  cmd->add_option("--cross-col", flags.cross_col, "binary column crossed with the bins");
  cmd->add_option("--min-size", flags.min_size, "drop subgroups smaller than this");
}

road::SubgroupSpec to_spec(const SubgroupFlags& flags) {
  road::SubgroupSpec spec;
  spec.bin_col = flags.bin_col;
  spec.bin_width = flags.bin_width;
  if (!flags.cross_col.empty()) spec.cross_col = flags.cross_col;
  spec.min_size = flags.min_size;
  return spec;
}

std::vector<double> parse_grid(const std::string& csv, const char* what) {
  std::vector<double> out;
  std::string cur;
  std::istringstream in(csv);
  while (std::getline(in, cur, ',')) {
    try {
      out.push_back(std::stod(cur));
    } catch (const std::exception&) {
      throw road::ConfigError(std::string("cannot parse ") + what + " value '" + cur + "'");
    }
  }
  if (out.empty()) throw road::ConfigError(std::string("empty ") + what + " list");
  return out;
}

void append_jsonl(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw road::ParseError("cannot write '" + path + "'");
  out << j.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"locally fair adversarial training toolkit"};
  app.require_subcommand(1);

  // ---- train ----
  auto* train_cmd = app.add_subcommand("train", "train one model and report held-out metrics");
  DataFlags train_data;
  SubgroupFlags train_sub;
  road::TrainConfig cfg;
  std::string algo_name = "road", mode_str = "dp", norm_str = "conditional";
  double test_frac = 0.3;
  std::string model_out, out_path;
  add_data_flags(train_cmd, train_data);
  add_subgroup_flags(train_cmd, train_sub);
  train_cmd->add_option("--algo", algo_name, "biased | globalfair | road | broad");
  train_cmd->add_option("--mode", mode_str, "fairness mode: dp | eo");
  train_cmd->add_option("--lambda", cfg.lambda_g, "fairness penalty weight");
  train_cmd->add_option("--tau", cfg.tau, "temperature of the weight concentration");
  train_cmd->add_option("--norm", norm_str, "weight normalization: conditional | global");
  train_cmd->add_option("--epochs", cfg.epochs, "training epochs");
  train_cmd->add_option("--batch", cfg.batch_size, "minibatch size");
  train_cmd->add_option("--seed", cfg.seed, "random seed");
  train_cmd->add_option("--lr-f", cfg.lr_f, "predictor learning rate");
  train_cmd->add_option("--lr-g", cfg.lr_g, "adversary learning rate");
  train_cmd->add_option("--lr-r", cfg.lr_r, "ratio network learning rate");
  train_cmd->add_option("--ng", cfg.n_g, "adversary steps per batch");
  train_cmd->add_option("--nr", cfg.n_r, "ratio steps per batch");
  train_cmd->add_option("--test-frac", test_frac, "held-out fraction");
  train_cmd->add_option("--model-out", model_out, "write the predictor here (plus .meta.json)");
  train_cmd->add_option("--out", out_path, "append the run report to this JSONL file");

  // ---- sweep ----
  auto* sweep_cmd = app.add_subcommand("sweep", "run a hyperparameter grid, resumable");
  DataFlags sweep_data;
  SubgroupFlags sweep_sub;
  road::TrainConfig sweep_base;
  std::string sweep_algos = "biased,globalfair,road,broad";
  std::string sweep_mode = "dp", sweep_norm = "conditional";
  std::string lambda_grid, tau_grid, seed_list = "0";
  double sweep_test_frac = 0.3;
  int jobs = 1;
  std::string sweep_out;
  add_data_flags(sweep_cmd, sweep_data);
  add_subgroup_flags(sweep_cmd, sweep_sub);
  sweep_cmd->add_option("--algos", sweep_algos, "comma list of algorithms");
  sweep_cmd->add_option("--mode", sweep_mode, "fairness mode: dp | eo");
  sweep_cmd->add_option("--norm", sweep_norm, "weight normalization: conditional | global");
  sweep_cmd->add_option("--lambda-grid", lambda_grid, "comma list (default: 20 values on [0,5])");
  sweep_cmd->add_option("--tau-grid", tau_grid, "comma list (default: 10 values on [0.001,1])");
  sweep_cmd->add_option("--seeds", seed_list, "comma list of seeds");
  sweep_cmd->add_option("--epochs", sweep_base.epochs, "training epochs");
  sweep_cmd->add_option("--batch", sweep_base.batch_size, "minibatch size");
  sweep_cmd->add_option("--lr-f", sweep_base.lr_f, "predictor learning rate");
  sweep_cmd->add_option("--lr-g", sweep_base.lr_g, "adversary learning rate");
  sweep_cmd->add_option("--lr-r", sweep_base.lr_r, "ratio network learning rate");
  sweep_cmd->add_option("--ng", sweep_base.n_g, "adversary steps per batch");
  sweep_cmd->add_option("--nr", sweep_base.n_r, "ratio steps per batch");
  sweep_cmd->add_option("--test-frac", sweep_test_frac, "held-out fraction");
  sweep_cmd->add_option("--jobs", jobs, "parallel workers");
  sweep_cmd->add_option("--out", sweep_out, "JSONL output (resume skips finished cells)")
      ->required();

  // ---- eval ----
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a saved model on a dataset");
  DataFlags eval_data;
  SubgroupFlags eval_sub;
  std::string eval_model, eval_out;
  add_data_flags(eval_cmd, eval_data);
  add_subgroup_flags(eval_cmd, eval_sub);
  eval_cmd->add_option("--model", eval_model, "model file (expects <model>.meta.json beside it)")
      ->required();
  eval_cmd->add_option("--out", eval_out, "append the metric row to this JSONL file");

  // ---- drift ----
  auto* drift_cmd = app.add_subcommand("drift", "evaluate a saved model across shifted sets");
  SubgroupFlags drift_sub;
  std::string drift_model, drift_out;
  std::vector<std::string> drift_sets;
  add_subgroup_flags(drift_cmd, drift_sub);
  drift_cmd->add_option("--model", drift_model, "model file")->required();
  drift_cmd
      ->add_option("--test", drift_sets, "name=path pairs of schema-identical CSVs (repeatable)")
      ->required();
  drift_cmd->add_option("--out", drift_out, "append rows to this JSONL file");

  // ---- subgroups ----
  auto* sub_cmd = app.add_subcommand("subgroups", "worst-case metrics under varying subgroup definitions");
  DataFlags sub_data;
  std::string sub_model, sub_out, sub_bin_col = "age", sub_widths = "5,10,15,20";
  std::vector<std::string> sub_crosses;
  std::size_t sub_min_size = 30;
  add_data_flags(sub_cmd, sub_data);
  sub_cmd->add_option("--model", sub_model, "model file")->required();
  sub_cmd->add_option("--bin-col", sub_bin_col, "feature column to bin");
  sub_cmd->add_option("--widths", sub_widths, "comma list of bin widths");
  sub_cmd->add_option("--cross-col", sub_crosses, "binary columns to cross (repeatable)");
  sub_cmd->add_option("--min-size", sub_min_size, "drop subgroups smaller than this");
  sub_cmd->add_option("--out", sub_out, "write rows to this JSONL file");

  // ---- plotdata ----
  auto* plot_cmd = app.add_subcommand("plotdata", "flatten sweep records into a CSV table");
  std::string plot_records, plot_kind, plot_out;
  double plot_budget = 1.0;
  plot_cmd->add_option("--records", plot_records, "sweep JSONL file")->required();
  plot_cmd
      ->add_option("--kind", plot_kind, "pareto_xy | local_di_bars | r_histogram | tau_curve")
      ->required();
  plot_cmd->add_option("--di-budget", plot_budget, "overall-disparity filter for pareto_xy");
  plot_cmd->add_option("--out", plot_out, "output CSV")->required();

  // ---- synth ----
  auto* synth_cmd = app.add_subcommand("synth", "generate a planted-bias synthetic dataset");
  road::SynthConfig synth_cfg;
  std::string synth_bias, synth_out;
  std::uint64_t synth_seed = 0;
  synth_cmd->add_option("--n", synth_cfg.n, "number of rows");
  synth_cmd->add_option("--regions", synth_cfg.regions, "number of age regions");
  synth_cmd->add_option("--base-bias", synth_cfg.base_bias, "bias added to every region");
  synth_cmd->add_option("--region-bias", synth_bias, "comma list of per-region biases");
  synth_cmd->add_option("--drift", synth_cfg.drift, "tilt of the region mixture");
  synth_cmd->add_option("--leak-noise", synth_cfg.leak_noise, "noise level of the leak feature");
  synth_cmd->add_option("--seed", synth_seed, "random seed");
  synth_cmd->add_option("--out", synth_out, "output CSV")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_cmd) {
      cfg.algo = road::algorithm_from_name(algo_name);
      cfg.mode = road::mode_from_name(mode_str);
      cfg.norm = road::norm_from_name(norm_str);
      const road::Dataset raw = road::load_csv(train_data.path, train_data.label, train_data.sensitive);

      road::SweepSpec spec;
      spec.base = cfg;
      spec.subgroups = to_spec(train_sub);
      spec.test_frac = test_frac;
      road::SweepCell cell{
          road::cell_id(cfg.algo, cfg.mode, cfg.norm, cfg.lambda_g, cfg.tau, cfg.seed), cfg.algo,
          cfg.lambda_g, cfg.tau, cfg.seed};
      if ((cfg.algo == road::Algorithm::Road || cfg.algo == road::Algorithm::Broad) &&
          cfg.tau == 0.0)
        std::cerr << "warning: tau 0 is outside the weight map's domain; using "
                  << road::kTauFloor << "\n";

      road::RngState split_rng(road::stream_seed(cfg.seed, "split"));
      auto [train_raw, test_raw] = road::split(raw, test_frac, split_rng);
      const road::Standardizer st = road::fit_standardizer(train_raw);
      road::Dataset train_std = train_raw, test_std = test_raw;
      st.apply(train_std);
      st.apply(test_std);
      const road::TrainedModel model = road::train(train_std, cfg);
      road::RunReport rep =
          road::evaluate_model(model, test_std, test_raw, spec.subgroups, train_std.n());
      rep.config["test_frac"] = test_frac;
      nlohmann::json line = rep.to_json();
      line["cell_id"] = cell.id;

      if (!model_out.empty()) {
        road::save_model(model_out, model.f);
        road::ModelMeta meta;
        meta.feature_names = raw.feature_names;
        meta.label_name = raw.label_name;
        meta.sensitive_name = raw.sensitive_name;
        meta.standardizer = st;
        meta.config = road::config_to_json(model.cfg, model.tau_floored);
        road::save_meta(model_out + ".meta.json", meta);
      }
      if (!out_path.empty()) append_jsonl(out_path, line);
      std::cout << line.dump(2) << "\n";
    } else if (*sweep_cmd) {
      road::SweepSpec spec;
      spec.base = sweep_base;
      spec.base.mode = road::mode_from_name(sweep_mode);
      spec.base.norm = road::norm_from_name(sweep_norm);
      spec.subgroups = to_spec(sweep_sub);
      spec.test_frac = sweep_test_frac;
      spec.jobs = jobs;
      spec.algos.clear();
      std::istringstream algo_in(sweep_algos);
      std::string tok;
      while (std::getline(algo_in, tok, ',')) spec.algos.push_back(road::algorithm_from_name(tok));
      if (!lambda_grid.empty()) spec.lambdas = parse_grid(lambda_grid, "lambda");
      if (!tau_grid.empty()) spec.taus = parse_grid(tau_grid, "tau");
      spec.seeds.clear();
      for (double v : parse_grid(seed_list, "seed")) spec.seeds.push_back(static_cast<std::uint64_t>(v));

      const road::Dataset raw = road::load_csv(sweep_data.path, sweep_data.label, sweep_data.sensitive);
      const road::SweepSummary sum = road::run_sweep(raw, spec, sweep_out);
      std::cout << "cells " << sum.total << ": ran " << sum.ran << ", skipped " << sum.skipped
                << ", failed " << sum.failed << "\n";
      if (sum.failed > 0) return 1;
    } else if (*eval_cmd) {
      const road::DenseNetwork f = road::load_model(eval_model);
      const road::ModelMeta meta = road::load_meta(eval_model + ".meta.json");
      const road::Dataset raw = road::load_csv(eval_data.path, eval_data.label, eval_data.sensitive);
      const auto rows = road::drift_eval(f, meta, {{eval_data.path, raw}}, to_spec(eval_sub));
      if (!eval_out.empty()) append_jsonl(eval_out, rows.at(0));
      std::cout << rows.at(0).dump(2) << "\n";
    } else if (*drift_cmd) {
      const road::DenseNetwork f = road::load_model(drift_model);
      const road::ModelMeta meta = road::load_meta(drift_model + ".meta.json");
      std::vector<std::pair<std::string, road::Dataset>> sets;
      for (const auto& pair : drift_sets) {
        const auto eq = pair.find('=');
        if (eq == std::string::npos)
          throw road::ConfigError("--test expects name=path, got '" + pair + "'");
        sets.emplace_back(pair.substr(0, eq),
                          road::load_csv(pair.substr(eq + 1), meta.label_name, meta.sensitive_name));
      }
      const auto rows = road::drift_eval(f, meta, sets, to_spec(drift_sub));
      for (const auto& row : rows) {
        if (!drift_out.empty()) append_jsonl(drift_out, row);
        std::cout << row.dump(2) << "\n";
      }
    } else if (*sub_cmd) {
      const road::DenseNetwork f = road::load_model(sub_model);
      const road::ModelMeta meta = road::load_meta(sub_model + ".meta.json");
      const road::Dataset raw = road::load_csv(sub_data.path, sub_data.label, sub_data.sensitive);
      const auto rows = road::subgroup_sensitivity(f, meta, raw, sub_bin_col,
                                                   parse_grid(sub_widths, "width"), sub_crosses,
                                                   sub_min_size);
      for (const auto& row : rows) {
        if (!sub_out.empty()) append_jsonl(sub_out, row);
        std::cout << row.dump(2) << "\n";
      }
    } else if (*plot_cmd) {
      const auto records = road::read_jsonl(plot_records);
      road::emit_plotdata(records, plot_kind, plot_out, plot_budget);
      std::cout << "wrote " << plot_out << "\n";
    } else if (*synth_cmd) {
      if (!synth_bias.empty()) synth_cfg.region_bias = parse_grid(synth_bias, "region bias");
      road::RngState rng(synth_seed);
      const road::Dataset ds = road::synthesize(synth_cfg, rng);
      road::write_csv(synth_out, ds);
      std::cout << "wrote " << synth_out << " (" << ds.n() << " rows)\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
