#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "jlct/curve.hpp"
#include "jlct/data.hpp"

namespace jlct {

/// Breslow cumulative baseline hazard, a step function jumping at the
/// distinct event times.
struct BaselineHazard {
  std::vector<double> event_times;        // strictly increasing
  std::vector<double> cumulative_hazard;  // nondecreasing, same length

  double at(double t) const;
  /// Hazard mass on (from, to].
  double mass(double from, double to) const;
};

struct CoxFit {
  std::vector<std::string> names;
  Eigen::VectorXd coefficients;
  Eigen::MatrixXd vcov;  // inverse observed information
  double log_partial_lik = 0.0;
  int n_events = 0;
  int iterations = 0;
  BaselineHazard baseline;
  bool converged = false;
  bool monotone = false;  // some |b_j| ran past the divergence bound

  double coefficient(const std::string& name) const;
};

struct CoxOptions {
  int max_iterations = 25;
  int max_halvings = 10;
  double loglik_rel_tol = 1e-9;
  double gradient_tol = 1e-8;
  double divergence_bound = 20.0;
};

/// Breslow-tie partial likelihood for counting-process rows (start, stop]:
/// a row is at risk for an event at t iff start < t <= stop. The design is
/// stored row-major; a fit may use only the leading `cols` columns, which is
/// how nested models share one problem.
class CoxProblem {
 public:
  struct Evaluation {
    double loglik = 0.0;
    Eigen::VectorXd score;
    Eigen::MatrixXd information;
  };

  CoxProblem() = default;
  CoxProblem(std::span<const double> start, std::span<const double> stop,
             std::span<const int> status, const Eigen::MatrixXd& design,
             std::span<const double> offset = {});

  /// Restriction to the given local rows (strictly increasing). Reuses the
  /// parent's sort orders, so this is linear in the parent size.
  CoxProblem subset(std::span<const std::size_t> rows) const;

  std::size_t n_rows() const { return start_.size(); }
  std::size_t n_cols() const { return p_; }
  int n_events() const { return n_events_; }

  Evaluation evaluate(const Eigen::VectorXd& beta, std::size_t cols,
                      bool derivatives = true) const;
  double loglik(const Eigen::VectorXd& beta) const;

  /// True when column j takes a single value over all rows.
  bool column_is_constant(std::size_t j) const;

  /// Newton-Raphson with step halving on the leading `cols` columns. Throws
  /// Error(InsufficientEvents) without events and Error(DegenerateDesign) for
  /// a constant column; non-convergence is reported through the flags.
  CoxFit fit(std::vector<std::string> names, std::size_t cols,
             const Eigen::VectorXd* init = nullptr,
             const CoxOptions& options = {}) const;

  BaselineHazard breslow(const Eigen::VectorXd& beta, std::size_t cols) const;

 private:
  double eta(std::size_t row, const double* beta, std::size_t cols) const;
  void build_events();

  std::size_t p_ = 0;
  std::vector<double> start_, stop_, offset_;
  std::vector<int> status_;
  std::vector<double> x_;  // row-major n x p
  std::vector<std::size_t> by_stop_desc_, by_start_desc_;
  std::vector<double> event_times_desc_;
  std::vector<std::size_t> event_begin_;  // groups into event_rows_, size = groups + 1
  std::vector<std::size_t> event_rows_;
  int n_events_ = 0;
};

/// Design matrix of the named covariates of an LTRC dataset.
Eigen::MatrixXd design_matrix(const LtrcDataset& data, const std::vector<std::string>& names);

CoxFit fit_cox(const LtrcDataset& data, const std::vector<std::string>& covariate_names,
               std::span<const double> offsets = {}, const CoxOptions& options = {});

double loglik_at(const LtrcDataset& data, const std::vector<std::string>& covariate_names,
                 const Eigen::VectorXd& coefficients);

/// Piecewise-constant covariate path. Piece k holds values[k] on
/// (starts[k], starts[k+1]]; the first piece also covers [0, starts[0]] and
/// the last one is carried forward.
struct CovariatePath {
  std::vector<std::string> names;
  std::vector<double> starts;
  std::vector<std::vector<double>> values;

  std::size_t piece_at(double t) const;
};

/// exp(x . b) with x looked up by the fit's covariate names.
double hazard_multiplier(const CoxFit& fit, const std::vector<std::string>& names,
                         std::span<const double> values);

/// S(t) = exp(-sum_{event times <= t} dH0 * exp(x(t) . b)) up to `horizon`.
Curve predict_survival(const CoxFit& fit, const CovariatePath& path, double horizon);

}  // namespace jlct
