#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "jlct/data.hpp"

namespace jlct {

/// Linear mixed model with a random subject intercept, shared fixed effects
/// and class-level contrasts (intercept plus class x random-var slopes) for
/// every class but the reference (smallest id).
struct LmmFit {
  std::vector<std::string> fixed_vars;
  std::vector<std::string> random_vars;
  std::vector<int> classes;                 // ascending; classes.front() is the reference
  std::vector<std::string> column_names;    // kept design columns
  std::vector<std::string> dropped_columns; // removed for rank deficiency
  Eigen::VectorXd coefficients;             // aligned with column_names
  double var_subject = 0.0;
  double var_resid = 0.0;
  double var_class = 0.0;  // spread of the class intercepts
  double variance_ratio = 0.0;
  bool boundary = false;
  double loglik = 0.0;
  std::map<std::string, double> subject_effects;  // BLUPs of the training subjects

  /// Per-class effect on [1, random_vars...]; zero for the reference class.
  std::vector<double> class_effect(int cls) const;
  double coefficient(const std::string& column) const;
};

struct LmmOptions {
  double min_ratio = 1e-8;
  double max_ratio = 1e8;
  double variance_floor = 1e-12;
};

/// `memberships` holds one class id per record, in dataset order.
LmmFit fit_lmm(const LongDataset& data, std::span<const int> memberships,
               const std::vector<std::string>& fixed_vars,
               const std::vector<std::string>& random_vars, const LmmOptions& options = {});

/// Profiled log-likelihood as a function of the variance ratio
/// var_subject / var_resid for the design implied by `fit`'s columns.
double lmm_profile_loglik(const LongDataset& data, std::span<const int> memberships,
                          const LmmFit& fit, double ratio);

/// Fixed part + class part, plus the subject's BLUP when `subject_effects` is
/// given and knows the subject (0 otherwise).
Eigen::VectorXd predict_lmm(const LmmFit& fit, const LongDataset& data,
                            std::span<const int> memberships,
                            const std::map<std::string, double>* subject_effects = nullptr);

}  // namespace jlct
