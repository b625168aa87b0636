// Command-line front end: simulate, fit, predict, evaluate, crossval and the
// terminal-node sweep.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "jlct/error.hpp"
#include "jlct/parallel.hpp"
#include "jlct/pipeline.hpp"
#include "jlct/serialize.hpp"

namespace fs = std::filesystem;
using namespace jlct;

namespace {

struct SimFlags {
  std::string structure = "tree";
  double p0 = 1.0;
  std::string hazard = "weibull-i";
  std::string censoring = "light";
  std::size_t n = 500;
  bool time_invariant = false;

  SimConfig config(std::uint64_t seed) const {
    SimConfig c;
    c.structure = parse_structure(structure);
    c.p0 = p0;
    c.hazard = parse_hazard(hazard);
    c.censoring = parse_censoring(censoring);
    c.n_subjects = n;
    c.time_varying = !time_invariant;
    c.seed = seed;
    return c;
  }
};

struct FitFlags {
  std::string roles;
  std::string variant = "jlct4";
  double stop = 3.84;
  std::size_t max_leaves = 6;
  int min_events = 0;
  std::size_t min_node_rows = 20;
  double variance_bound = 1e5;
  bool shared_baseline = false;

  FitOptions options(int threads) const {
    FitOptions o;
    o.variant = parse_variant(variant);
    o.controls.stop_threshold = stop;
    o.controls.max_terminal_nodes = max_leaves;
    o.controls.min_events = min_events;
    o.controls.min_node_rows = min_node_rows;
    o.controls.variance_bound = variance_bound;
    o.controls.threads = threads;
    o.shared_baseline = shared_baseline;
    return o;
  }
};

void add_sim_flags(CLI::App* app, SimFlags& f) {
  app->add_option("--structure", f.structure, "tree|linear|nonlinear|asymmetric|null")->capture_default_str();
  app->add_option("--p0", f.p0, "majority-class probability")->capture_default_str();
  app->add_option("--hazard", f.hazard, "exponential|weibull-d|weibull-i")->capture_default_str();
  app->add_option("--censoring", f.censoring, "none|light|heavy")->capture_default_str();
  app->add_option("--n", f.n, "number of subjects")->capture_default_str();
  app->add_flag("--time-invariant", f.time_invariant, "draw covariates once per subject");
}

void add_fit_flags(CLI::App* app, FitFlags& f, bool roles_required) {
  auto* roles = app->add_option("--roles", f.roles, "variable roles file (JSON)");
  if (roles_required) roles->required();
  app->add_option("--variant", f.variant, "jlct1|jlct2|jlct3|jlct4")->capture_default_str();
  app->add_option("--stop", f.stop, "stopping threshold on the node statistic (2.71, 3.84, 6.63, ...)")
      ->capture_default_str();
  app->add_option("--max-leaves", f.max_leaves, "terminal-node cap after pruning")->capture_default_str();
  app->add_option("--min-events", f.min_events, "events required per node (0: survival covariates + 1)")
      ->capture_default_str();
  app->add_option("--min-node-rows", f.min_node_rows, "rows required per child")->capture_default_str();
  app->add_option("--variance-bound", f.variance_bound, "largest admissible coefficient variance")
      ->capture_default_str();
  app->add_flag("--shared-baseline", f.shared_baseline, "one baseline hazard across leaves");
}

LongDataset load(const std::string& path, const VariableRoles& roles) { return ingest_csv(path, roles); }

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Usage, "cannot write " + path);
  return out;
}

void write_curves(std::ostream& out, const LongDataset& data, const std::vector<Curve>& curves) {
  out << "ID,time,survival\n";
  for (std::size_t i = 0; i < curves.size(); ++i) {
    const auto& id = data.subjects()[i].id;
    out << id << ",0," << format_double(curves[i].initial()) << '\n';
    const auto& t = curves[i].breakpoints();
    const auto& v = curves[i].values();
    for (std::size_t k = 0; k < t.size(); ++k) out << id << ',' << format_double(t[k]) << ',' << format_double(v[k]) << '\n';
  }
}

void write_predictions(std::ostream& out, const LongDataset& data, const ModelPrediction& p) {
  out << "ID,time,leaf,y_hat\n";
  std::size_t r = 0;
  for (const auto& s : data.subjects()) {
    for (const auto& rec : s.records) {
      out << s.id << ',' << format_double(rec.time) << ',' << p.leaves[r] << ',' << format_double(p.outcome[r]) << '\n';
      ++r;
    }
  }
}

/// Scores the truth against itself: the reference point of every metric.
MetricReport oracle_report(const LongDataset& data, const SimTruth& truth) {
  MetricReport r;
  const double horizon = max_observed_time(data);
  std::vector<Curve> curves = true_curves(truth);
  const auto y = observed_outcomes(data);
  const auto cls = flatten(truth.record_class);
  const auto table = true_slope_table(truth.config.structure, truth.config.hazard);
  r.ise_in = r.ise_out = ise(curves, curves, horizon);
  r.mse_y_in = r.mse_y_out = mse_y(y, y);
  r.mse_b = mse_b(table, cls, table, cls);
  r.acc_g = acc_g(cls, cls);
  r.ibs = ibs(curves, observed_events(data));
  r.n_terminal = static_cast<double>(table.size());
  return r;
}

std::string mean_sd(const std::vector<double>& v) {
  double m = 0.0, s = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  for (double x : v) s += (x - m) * (x - m);
  s = v.size() > 1 ? std::sqrt(s / static_cast<double>(v.size() - 1)) : 0.0;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f (%.2f)", m, s);
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint latent class trees for longitudinal and time-to-event data"};
  app.require_subcommand(1);
  std::uint64_t seed = 1;
  int threads = 1;
  std::string out_path;
  std::string curves_path;
  bool timing = false;
  auto common = [&](CLI::App* sub, bool needs_out) {
    sub->add_option("--seed", seed, "random seed")->capture_default_str();
    sub->add_option("--threads", threads, "worker threads")->capture_default_str();
    auto* o = sub->add_option("--out", out_path, "output file");
    if (needs_out) o->required();
  };

  SimFlags sim;
  std::string truth_path;
  auto* simulate_cmd = app.add_subcommand("simulate", "write a simulated dataset and its truth sidecar");
  add_sim_flags(simulate_cmd, sim);
  common(simulate_cmd, true);
  simulate_cmd->add_option("--truth", truth_path, "truth sidecar path (default: <out>.truth.json)");
  std::string roles_out;
  simulate_cmd->add_option("--roles-out", roles_out, "also write the simulation roles file here");

  FitFlags fit;
  std::string data_path;
  auto* fit_cmd = app.add_subcommand("fit", "grow, prune and fit a tree; prints the tree");
  fit_cmd->add_option("--data", data_path, "longitudinal CSV")->required();
  add_fit_flags(fit_cmd, fit, true);
  common(fit_cmd, true);

  std::string model_path;
  double horizon = 0.0;
  bool in_sample = false;
  auto* predict_cmd = app.add_subcommand("predict", "per-record leaves and outcome predictions");
  predict_cmd->add_option("--model", model_path, "model file")->required();
  predict_cmd->add_option("--data", data_path, "longitudinal CSV")->required();
  predict_cmd->add_option("--horizon", horizon, "curve horizon (default: largest observed time)");
  predict_cmd->add_option("--emit-curves", curves_path, "write survival curves CSV");
  predict_cmd->add_flag("--in-sample", in_sample, "use the training subjects' intercepts");
  common(predict_cmd, true);

  std::string train_path, train_truth;
  bool oracle = false;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "score a model against simulation truth");
  evaluate_cmd->add_option("--model", model_path, "model file");
  evaluate_cmd->add_option("--data", data_path, "out-of-sample CSV")->required();
  evaluate_cmd->add_option("--truth", truth_path, "truth sidecar of --data")->required();
  evaluate_cmd->add_option("--train-data", train_path, "training CSV for in-sample metrics");
  evaluate_cmd->add_option("--train-truth", train_truth, "truth sidecar of --train-data");
  evaluate_cmd->add_option("--roles", fit.roles, "variable roles file (needed to read the CSVs)")->required();
  evaluate_cmd->add_flag("--oracle", oracle, "score the truth itself instead of a model");
  common(evaluate_cmd, false);

  int folds = 10;
  auto* crossval_cmd = app.add_subcommand("crossval", "subject-level k-fold cross-validation");
  crossval_cmd->add_option("--data", data_path, "longitudinal CSV")->required();
  crossval_cmd->add_option("--folds", folds, "number of folds")->capture_default_str();
  crossval_cmd->add_flag("--timing", timing, "include runtime_seconds in the report");
  add_fit_flags(crossval_cmd, fit, true);
  common(crossval_cmd, false);

  std::size_t reps = 20;
  std::vector<std::string> cells = {"tree:0.85", "tree:1", "linear:0.85", "linear:1", "nonlinear:0.85",
                                    "nonlinear:1", "asymmetric:0.85", "asymmetric:1", "null:1"};
  auto* table_cmd = app.add_subcommand("replicate-table4", "mean (sd) terminal nodes per scenario");
  table_cmd->add_option("--reps", reps, "replicates per cell")->capture_default_str();
  table_cmd->add_option("--cells", cells, "structure:p0 cells");
  table_cmd->add_option("--n", sim.n, "subjects per replicate")->capture_default_str();
  table_cmd->add_option("--hazard", sim.hazard, "exponential|weibull-d|weibull-i")->capture_default_str();
  table_cmd->add_option("--censoring", sim.censoring, "none|light|heavy")->capture_default_str();
  table_cmd->add_option("--emit-curves", curves_path, "write per-replicate node counts (boxplot-ready CSV)");
  add_fit_flags(table_cmd, fit, false);
  common(table_cmd, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*simulate_cmd) {
      const auto data = simulate(sim.config(seed));
      const auto roles = simulation_roles();
      auto out = open_out(out_path);
      write_csv(out, data.data, roles);
      write_json(truth_path.empty() ? out_path + ".truth.json" : truth_path, truth_to_json(data.truth));
      if (!roles_out.empty()) write_json(roles_out, roles_to_json(roles));
    } else if (*fit_cmd) {
      const auto roles = read_roles(fit.roles);
      const auto model = fit_model(load(data_path, roles), roles, fit.options(threads));
      write_json(out_path, model_to_json(model));
      std::cout << render_text(model.tree);
    } else if (*predict_cmd) {
      const auto model = model_from_json(read_json(model_path));
      const auto data = load(data_path, model.input_roles);
      const double h = horizon > 0.0 ? horizon : max_observed_time(data);
      const auto p = predict_model(model, data, h, in_sample, threads);
      auto out = open_out(out_path);
      write_predictions(out, data, p);
      if (!curves_path.empty()) {
        auto c = open_out(curves_path);
        write_curves(c, data, p.survival);
      }
    } else if (*evaluate_cmd) {
      const auto roles = read_roles(fit.roles);
      const auto test = load(data_path, roles);
      const auto test_truth = truth_from_json(read_json(truth_path));
      MetricReport report;
      if (oracle) {
        report = oracle_report(test, test_truth);
      } else {
        if (model_path.empty()) throw Error(ErrorKind::Usage, "evaluate needs --model or --oracle");
        const auto model = model_from_json(read_json(model_path));
        report.n_terminal = static_cast<double>(model.tree.n_leaves());
        evaluate_out_of_sample(model, test, test_truth, report, threads);
        if (!train_path.empty()) {
          if (train_truth.empty()) throw Error(ErrorKind::Usage, "--train-data needs --train-truth");
          evaluate_in_sample(model, load(train_path, roles), truth_from_json(read_json(train_truth)), report,
                             threads);
        }
      }
      if (out_path.empty()) {
        report.write_key_value(std::cout);
      } else {
        auto out = open_out(out_path);
        report.write_key_value(out);
      }
    } else if (*crossval_cmd) {
      const auto roles = read_roles(fit.roles);
      const auto data = load(data_path, roles);
      const auto options = fit.options(1);
      const auto result = kfold_cv(
          data, folds,
          [&](const LongDataset& train, const LongDataset& test) {
            const auto start = std::chrono::steady_clock::now();
            const auto model = fit_model(train, roles, options);
            MetricReport r;
            r.n_terminal = static_cast<double>(model.tree.n_leaves());
            const auto in = predict_model(model, train, max_observed_time(train), true);
            r.mse_y_in = mse_y(in.outcome, observed_outcomes(train));
            const auto out = predict_model(model, test, max_observed_time(test), false);
            r.mse_y_out = mse_y(out.outcome, observed_outcomes(test));
            r.ibs = ibs(out.survival, observed_events(test));
            r.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            return r;
          },
          seed, threads);
      std::ostringstream text;
      text << "fold," << MetricReport::csv_header(timing) << '\n';
      for (std::size_t f = 0; f < result.folds.size(); ++f) text << f + 1 << ',' << result.folds[f].csv_row(timing) << '\n';
      text << "mean," << result.mean.csv_row(timing) << '\n';
      if (out_path.empty()) {
        std::cout << text.str();
      } else {
        open_out(out_path) << text.str();
      }
    } else if (*table_cmd) {
      const auto roles = simulation_roles();
      const auto options = fit.options(1);
      std::ostringstream summary, per_rep;
      summary << "structure,p0,terminal_nodes\n";
      per_rep << "structure,p0,replicate,terminal_nodes\n";
      for (const auto& cell : cells) {
        const auto colon = cell.find(':');
        if (colon == std::string::npos) throw Error(ErrorKind::Usage, "cell '" + cell + "' is not structure:p0");
        SimFlags f = sim;
        f.structure = cell.substr(0, colon);
        f.p0 = std::stod(cell.substr(colon + 1));
        std::vector<double> leaves(reps);
        parallel_for(reps, threads, [&](std::size_t r) {
          const auto data = simulate(f.config(seed + r));
          leaves[r] = static_cast<double>(fit_model(data.data, roles, options).tree.n_leaves());
        });
        summary << f.structure << ',' << format_double(f.p0) << ',' << mean_sd(leaves) << '\n';
        for (std::size_t r = 0; r < reps; ++r) {
          per_rep << f.structure << ',' << format_double(f.p0) << ',' << r + 1 << ',' << leaves[r] << '\n';
        }
      }
      std::cout << summary.str();
      if (!out_path.empty()) open_out(out_path) << summary.str();
      if (!curves_path.empty()) open_out(curves_path) << per_rep.str();
    }
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
    return e.kind() == ErrorKind::Usage ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
