#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "jlct/curve.hpp"
#include "jlct/data.hpp"

namespace jlct {

/// Auxiliary uniform grid points added to every integration grid.
inline constexpr int kAuxGridPoints = 512;

/// (1/N) sum_i (1/horizon) int_0^horizon (pred_i - truth_i)^2 dt.
double ise(std::span<const Curve> predicted, std::span<const Curve> truth, double horizon);

/// Sum of squared errors over all rows divided by the row count.
double mse_y(std::span<const double> predicted, std::span<const double> actual);

using SlopeTable = std::map<int, std::vector<double>>;

/// Row average of ||estimated[assigned_r] - truth[true_class_r]||^2.
double mse_b(const SlopeTable& estimated, std::span<const int> assigned, const SlopeTable& truth,
             std::span<const int> true_class);

/// Share of rows whose true class equals the majority true class of their
/// leaf (majority ties go to the smaller class id).
double acc_g(std::span<const int> leaves, std::span<const int> true_class);

/// BS(t) = (1/N) sum_i (I(Y_i > t) - S_i(t))^2. With `exclude_censored`,
/// subjects censored at or before t are left out.
double brier(std::span<const double> predicted_at_t, std::span<const SubjectEvent> events, double t,
             bool exclude_censored = false);

/// (1/max Y) int_0^{max Y} BS(t) dt.
double ibs(std::span<const Curve> predicted, std::span<const SubjectEvent> events,
           bool exclude_censored = false);

struct MetricReport {
  double ise_in = 0.0;
  double ise_out = 0.0;
  double mse_y_in = 0.0;
  double mse_y_out = 0.0;
  double mse_b = 0.0;
  double acc_g = 0.0;
  double ibs = 0.0;
  double n_terminal = 0.0;
  double runtime_seconds = 0.0;

  /// "key=value" lines; runtime is written only when `with_runtime`.
  void write_key_value(std::ostream& out, bool with_runtime = false) const;
  static std::string csv_header(bool with_runtime = false);
  std::string csv_row(bool with_runtime = false) const;
  /// Field-wise mean.
  static MetricReport mean(std::span<const MetricReport> reports);
};

/// Fold id (0..k-1) per subject: a seeded shuffle dealt round-robin, so fold
/// sizes differ by at most one.
std::vector<int> fold_assignment(std::size_t n_subjects, int k, std::uint64_t seed);

struct CvResult {
  std::vector<MetricReport> folds;
  MetricReport mean;
};

using FoldEvaluator = std::function<MetricReport(const LongDataset& train, const LongDataset& test)>;

/// Subject-level k-fold cross-validation. Folds may run concurrently; the
/// result does not depend on `threads`.
CvResult kfold_cv(const LongDataset& data, int k, const FoldEvaluator& evaluate, std::uint64_t seed,
                  int threads = 1);

}  // namespace jlct
