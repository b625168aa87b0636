#pragma once

#include <string>
#include <vector>

#include "jlct/curve.hpp"
#include "jlct/data.hpp"
#include "jlct/metrics.hpp"
#include "jlct/simgen.hpp"
#include "jlct/tree.hpp"

namespace jlct {

/// Model variants by which covariates each component sees:
///   jlct1: no splitting; jlct2: first-encountered survival and split vars;
///   jlct3: first-encountered survival vars only; jlct4: everything as observed.
enum class Variant { Jlct1, Jlct2, Jlct3, Jlct4 };

const char* to_string(Variant v);
Variant parse_variant(const std::string& s);

/// Column prefix of first-encountered copies.
inline constexpr const char* kFirstPrefix = "first:";

struct VariantData {
  LongDataset data;
  VariableRoles roles;
};

/// Adds the first-encountered copies the variant needs and points the roles
/// at them. Longitudinal roles are never converted.
VariantData apply_variant(const LongDataset& data, const VariableRoles& roles, Variant variant);

struct FitOptions {
  Variant variant = Variant::Jlct4;
  SplitControls controls;
  bool shared_baseline = false;
};

struct JlctModel {
  Variant variant = Variant::Jlct4;
  VariableRoles input_roles;  // as supplied, before variant conversion
  JlctTree tree;              // roles inside refer to converted columns
  std::size_t grown_leaves = 1;
};

/// ingest -> variant conversion -> counting process -> grow -> prune -> leaf models.
JlctModel fit_model(const LongDataset& data, const VariableRoles& roles, const FitOptions& options);

struct ModelPrediction {
  std::vector<Curve> survival;  // one per subject
  std::vector<double> outcome;  // one per record, dataset order
  std::vector<int> leaves;      // one per record, dataset order
};

/// Predicts every subject of `data` up to `horizon`. Subject intercepts are
/// used for subjects seen in training when `use_subject_effects` is set.
ModelPrediction predict_model(const JlctModel& model, const LongDataset& data, double horizon,
                              bool use_subject_effects, int threads = 1);

/// Survival slopes per leaf, in the order of the input survival roles.
SlopeTable leaf_slopes(const JlctModel& model);

/// True slopes per class of a simulation scenario.
SlopeTable true_slope_table(Structure structure, HazardFamily hazard);

/// Largest observed event/censoring time.
double max_observed_time(const LongDataset& data);

std::vector<double> observed_outcomes(const LongDataset& data);
std::vector<SubjectEvent> observed_events(const LongDataset& data);
std::vector<int> flatten(const std::vector<std::vector<int>>& nested);

/// In-sample ISE and MSE_y (training subjects keep their intercepts).
void evaluate_in_sample(const JlctModel& model, const LongDataset& data, const SimTruth& truth,
                        MetricReport& report, int threads = 1);
/// Out-of-sample ISE, MSE_y, MSE_b, Acc_g and IBS.
void evaluate_out_of_sample(const JlctModel& model, const LongDataset& data, const SimTruth& truth,
                            MetricReport& report, int threads = 1);

std::vector<Curve> true_curves(const SimTruth& truth);

/// Simulation-study metrics: in-sample ISE/MSE_y on `train`, out-of-sample
/// ISE/MSE_y/MSE_b/Acc_g/IBS on `test`.
MetricReport evaluate_simulation(const JlctModel& model, const SimulatedData& train,
                                 const SimulatedData& test, int threads = 1);

}  // namespace jlct
