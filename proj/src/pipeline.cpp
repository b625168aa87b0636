#include "jlct/pipeline.hpp"

#include <algorithm>

#include "jlct/error.hpp"
#include "jlct/parallel.hpp"

namespace jlct {

const char* to_string(Variant v) {
  switch (v) {
    case Variant::Jlct1: return "jlct1";
    case Variant::Jlct2: return "jlct2";
    case Variant::Jlct3: return "jlct3";
    case Variant::Jlct4: return "jlct4";
  }
  return "unknown";
}

Variant parse_variant(const std::string& s) {
  for (auto v : {Variant::Jlct1, Variant::Jlct2, Variant::Jlct3, Variant::Jlct4}) {
    if (s == to_string(v)) return v;
  }
  throw Error(ErrorKind::Usage, "unknown variant '" + s + "' (expected jlct1..jlct4)");
}

namespace {

std::vector<std::string> prefixed(const std::vector<std::string>& vars) {
  std::vector<std::string> out;
  out.reserve(vars.size());
  for (const auto& v : vars) out.push_back(kFirstPrefix + v);
  return out;
}

}  // namespace

VariantData apply_variant(const LongDataset& data, const VariableRoles& roles, Variant variant) {
  VariantData out{data, roles};
  std::vector<std::string> convert;
  switch (variant) {
    case Variant::Jlct1:
      out.roles.split_vars.clear();
      break;
    case Variant::Jlct2:
      convert = roles.survival_vars;
      convert.insert(convert.end(), roles.split_vars.begin(), roles.split_vars.end());
      out.roles.survival_vars = prefixed(roles.survival_vars);
      out.roles.split_vars = prefixed(roles.split_vars);
      break;
    case Variant::Jlct3:
      convert = roles.survival_vars;
      out.roles.survival_vars = prefixed(roles.survival_vars);
      break;
    case Variant::Jlct4:
      break;
  }
  if (!convert.empty()) {
    std::sort(convert.begin(), convert.end());
    convert.erase(std::unique(convert.begin(), convert.end()), convert.end());
    out.data = add_first_encountered_columns(data, convert, kFirstPrefix);
  }
  return out;
}

JlctModel fit_model(const LongDataset& data, const VariableRoles& roles, const FitOptions& options) {
  options.controls.validate();
  const auto prepared = apply_variant(data, roles, options.variant);
  const auto ltrc = to_ltrc(prepared.data);
  JlctModel model;
  model.variant = options.variant;
  model.input_roles = roles;
  const JlctTree grown = grow(ltrc, prepared.roles, options.controls);
  model.grown_leaves = grown.n_leaves();
  const JlctTree pruned = prune_to(grown, options.controls.max_terminal_nodes);
  model.tree = fit_leaf_models(pruned, ltrc, prepared.data, options.shared_baseline);
  return model;
}

ModelPrediction predict_model(const JlctModel& model, const LongDataset& data, double horizon,
                              bool use_subject_effects, int threads) {
  const auto prepared = apply_variant(data, model.input_roles, model.variant);
  const auto& subjects = prepared.data.subjects();
  const auto& names = prepared.data.covariate_names();
  std::vector<SubjectPrediction> per_subject(subjects.size());
  const auto* effects = use_subject_effects ? &model.tree.longitudinal.subject_effects : nullptr;
  parallel_for(subjects.size(), threads, [&](std::size_t i) {
    per_subject[i] = predict(model.tree, names, subjects[i], horizon, effects);
  });
  ModelPrediction out;
  out.survival.reserve(subjects.size());
  for (auto& p : per_subject) {
    out.survival.push_back(std::move(p.survival));
    out.outcome.insert(out.outcome.end(), p.outcome.begin(), p.outcome.end());
    out.leaves.insert(out.leaves.end(), p.leaves.begin(), p.leaves.end());
  }
  return out;
}

SlopeTable leaf_slopes(const JlctModel& model) {
  SlopeTable out;
  const auto& vars = model.tree.roles.survival_vars;
  for (int leaf : model.tree.leaves()) {
    const auto& fit = model.tree.leaf_cox(leaf);
    std::vector<double> b;
    b.reserve(vars.size());
    for (const auto& v : vars) b.push_back(fit.coefficient(v));
    out[leaf] = std::move(b);
  }
  return out;
}

SlopeTable true_slope_table(Structure structure, HazardFamily hazard) {
  SlopeTable out;
  for (int g = 1; g <= 4; ++g) {
    const auto b = true_slopes(structure, hazard, g);
    out[g] = std::vector<double>(b.begin(), b.end());
  }
  return out;
}

double max_observed_time(const LongDataset& data) {
  double t = 0.0;
  for (const auto& s : data.subjects()) t = std::max(t, s.event.event_time);
  return t;
}

std::vector<double> observed_outcomes(const LongDataset& data) {
  std::vector<double> y;
  y.reserve(data.n_records());
  for (const auto& s : data.subjects()) {
    for (const auto& r : s.records) y.push_back(r.outcome);
  }
  return y;
}

std::vector<SubjectEvent> observed_events(const LongDataset& data) {
  std::vector<SubjectEvent> e;
  e.reserve(data.n_subjects());
  for (const auto& s : data.subjects()) e.push_back(s.event);
  return e;
}

std::vector<int> flatten(const std::vector<std::vector<int>>& nested) {
  std::vector<int> out;
  for (const auto& v : nested) out.insert(out.end(), v.begin(), v.end());
  return out;
}

std::vector<Curve> true_curves(const SimTruth& truth) {
  std::vector<Curve> out;
  out.reserve(truth.survival.size());
  for (std::size_t i = 0; i < truth.survival.size(); ++i) out.push_back(true_survival(truth, i));
  return out;
}

namespace {

void check_truth(const LongDataset& data, const SimTruth& truth) {
  if (truth.survival.size() != data.n_subjects() || truth.record_class.size() != data.n_subjects()) {
    throw Error(ErrorKind::Shape, "truth does not match the dataset's subjects");
  }
  for (std::size_t i = 0; i < data.n_subjects(); ++i) {
    if (truth.record_class[i].size() != data.subjects()[i].records.size()) {
      throw Error(ErrorKind::Shape, "truth does not match the records of subject " + data.subjects()[i].id);
    }
  }
}

}  // namespace

void evaluate_in_sample(const JlctModel& model, const LongDataset& data, const SimTruth& truth,
                        MetricReport& report, int threads) {
  check_truth(data, truth);
  const double horizon = max_observed_time(data);
  const auto p = predict_model(model, data, horizon, true, threads);
  report.ise_in = ise(p.survival, true_curves(truth), horizon);
  report.mse_y_in = mse_y(p.outcome, observed_outcomes(data));
}

void evaluate_out_of_sample(const JlctModel& model, const LongDataset& data, const SimTruth& truth,
                            MetricReport& report, int threads) {
  check_truth(data, truth);
  const double horizon = max_observed_time(data);
  const auto p = predict_model(model, data, horizon, false, threads);
  report.ise_out = ise(p.survival, true_curves(truth), horizon);
  report.mse_y_out = mse_y(p.outcome, observed_outcomes(data));
  const auto true_class = flatten(truth.record_class);
  report.mse_b = mse_b(leaf_slopes(model), p.leaves,
                       true_slope_table(truth.config.structure, truth.config.hazard), true_class);
  report.acc_g = acc_g(p.leaves, true_class);
  report.ibs = ibs(p.survival, observed_events(data));
}

MetricReport evaluate_simulation(const JlctModel& model, const SimulatedData& train,
                                 const SimulatedData& test, int threads) {
  MetricReport report;
  report.n_terminal = static_cast<double>(model.tree.n_leaves());
  evaluate_in_sample(model, train.data, train.truth, report, threads);
  evaluate_out_of_sample(model, test.data, test.truth, report, threads);
  return report;
}

}  // namespace jlct
