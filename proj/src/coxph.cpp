#include "jlct/coxph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Cholesky>

#include "jlct/error.hpp"

namespace jlct {

// ---------------------------------------------------------------------------
// BaselineHazard

double BaselineHazard::at(double t) const {
  auto it = std::upper_bound(event_times.begin(), event_times.end(), t);
  if (it == event_times.begin()) return 0.0;
  return cumulative_hazard[static_cast<std::size_t>(it - event_times.begin()) - 1];
}

double BaselineHazard::mass(double from, double to) const {
  if (!(to > from)) return 0.0;
  return at(to) - at(from);
}

double CoxFit::coefficient(const std::string& name) const {
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw Error(ErrorKind::MissingColumn, "fit has no coefficient '" + name + "'");
  return coefficients[it - names.begin()];
}

// ---------------------------------------------------------------------------
// CoxProblem

CoxProblem::CoxProblem(std::span<const double> start, std::span<const double> stop,
                       std::span<const int> status, const Eigen::MatrixXd& design,
                       std::span<const double> offset)
    : p_(static_cast<std::size_t>(design.cols())),
      start_(start.begin(), start.end()),
      stop_(stop.begin(), stop.end()),
      status_(status.begin(), status.end()) {
  const auto n = start_.size();
  if (stop_.size() != n || status_.size() != n || static_cast<std::size_t>(design.rows()) != n) {
    throw Error(ErrorKind::Shape, "cox: row counts of start/stop/status/design differ");
  }
  if (!offset.empty() && offset.size() != n) throw Error(ErrorKind::Shape, "cox: offset length");
  for (std::size_t i = 0; i < n; ++i) {
    if (!(start_[i] < stop_[i])) {
      throw Error(ErrorKind::Inconsistent, "cox: row with start >= stop");
    }
  }
  offset_.assign(offset.begin(), offset.end());
  x_.resize(n * p_);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < p_; ++j) {
      x_[i * p_ + j] = design(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
  }
  by_stop_desc_.resize(n);
  std::iota(by_stop_desc_.begin(), by_stop_desc_.end(), std::size_t{0});
  by_start_desc_ = by_stop_desc_;
  std::stable_sort(by_stop_desc_.begin(), by_stop_desc_.end(),
                   [&](std::size_t a, std::size_t b) { return stop_[a] > stop_[b]; });
  std::stable_sort(by_start_desc_.begin(), by_start_desc_.end(),
                   [&](std::size_t a, std::size_t b) { return start_[a] > start_[b]; });
  build_events();
}

void CoxProblem::build_events() {
  event_times_desc_.clear();
  event_begin_.clear();
  event_rows_.clear();
  n_events_ = 0;
  for (auto r : by_stop_desc_) {
    if (status_[r] != 1) continue;
    if (event_times_desc_.empty() || stop_[r] != event_times_desc_.back()) {
      event_times_desc_.push_back(stop_[r]);
      event_begin_.push_back(event_rows_.size());
    }
    event_rows_.push_back(r);
    ++n_events_;
  }
  event_begin_.push_back(event_rows_.size());
}

CoxProblem CoxProblem::subset(std::span<const std::size_t> rows) const {
  CoxProblem out;
  out.p_ = p_;
  const auto n = rows.size();
  constexpr auto kDropped = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> remap(start_.size(), kDropped);
  out.start_.resize(n);
  out.stop_.resize(n);
  out.status_.resize(n);
  out.x_.resize(n * p_);
  if (!offset_.empty()) out.offset_.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const auto r = rows[k];
    remap[r] = k;
    out.start_[k] = start_[r];
    out.stop_[k] = stop_[r];
    out.status_[k] = status_[r];
    if (!offset_.empty()) out.offset_[k] = offset_[r];
    std::copy_n(x_.begin() + static_cast<std::ptrdiff_t>(r * p_), p_,
                out.x_.begin() + static_cast<std::ptrdiff_t>(k * p_));
  }
  out.by_stop_desc_.reserve(n);
  out.by_start_desc_.reserve(n);
  for (auto r : by_stop_desc_) {
    if (remap[r] != kDropped) out.by_stop_desc_.push_back(remap[r]);
  }
  for (auto r : by_start_desc_) {
    if (remap[r] != kDropped) out.by_start_desc_.push_back(remap[r]);
  }
  out.build_events();
  return out;
}

double CoxProblem::eta(std::size_t row, const double* beta, std::size_t cols) const {
  double e = offset_.empty() ? 0.0 : offset_[row];
  const double* xr = x_.data() + row * p_;
  for (std::size_t j = 0; j < cols; ++j) e += xr[j] * beta[j];
  return e;
}

bool CoxProblem::column_is_constant(std::size_t j) const {
  const auto n = start_.size();
  if (n == 0) return true;
  const double v0 = x_[j];
  for (std::size_t i = 1; i < n; ++i) {
    if (x_[i * p_ + j] != v0) return false;
  }
  return true;
}

CoxProblem::Evaluation CoxProblem::evaluate(const Eigen::VectorXd& beta, std::size_t cols,
                                            bool derivatives) const {
  if (static_cast<std::size_t>(beta.size()) != cols || cols > p_) {
    throw Error(ErrorKind::Shape, "cox: coefficient length does not match the design");
  }
  const auto n = start_.size();
  const std::size_t k = cols;
  std::vector<double> eta_v(n), w(n);
  double shift = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    eta_v[i] = eta(i, beta.data(), k);
    shift = std::max(shift, eta_v[i]);
  }
  if (n == 0) shift = 0.0;
  for (std::size_t i = 0; i < n; ++i) w[i] = std::exp(eta_v[i] - shift);

  Evaluation ev;
  ev.score = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(k));
  ev.information = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
  std::vector<double> s1(k, 0.0), s2(k * k, 0.0), ev_x(k);
  double s0 = 0.0, added = 0.0;

  auto accumulate = [&](std::size_t r, double sign) {
    const double wr = sign * w[r];
    s0 += wr;
    if (!derivatives) return;
    const double* xr = x_.data() + r * p_;
    for (std::size_t a = 0; a < k; ++a) {
      const double wa = wr * xr[a];
      s1[a] += wa;
      double* row = s2.data() + a * k;
      for (std::size_t b = 0; b <= a; ++b) row[b] += wa * xr[b];
    }
  };

  std::size_t ia = 0, ir = 0;
  const auto groups = event_times_desc_.size();
  for (std::size_t g = 0; g < groups; ++g) {
    const double tau = event_times_desc_[g];
    while (ia < n && stop_[by_stop_desc_[ia]] >= tau) {
      accumulate(by_stop_desc_[ia], 1.0);
      added += w[by_stop_desc_[ia]];
      ++ia;
    }
    while (ir < n && start_[by_start_desc_[ir]] >= tau) {
      accumulate(by_start_desc_[ir], -1.0);
      ++ir;
    }
    double r0 = s0;
    const double* r1 = s1.data();
    const double* r2 = s2.data();
    std::vector<double> d1, d2;
    if (!(r0 > 1e-10 * added)) {
      // Cancellation in the running sums; recompute this risk set directly.
      r0 = 0.0;
      d1.assign(k, 0.0);
      d2.assign(k * k, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        if (start_[i] < tau && tau <= stop_[i]) {
          r0 += w[i];
          const double* xi = x_.data() + i * p_;
          for (std::size_t a = 0; a < k; ++a) {
            d1[a] += w[i] * xi[a];
            for (std::size_t b = 0; b <= a; ++b) d2[a * k + b] += w[i] * xi[a] * xi[b];
          }
        }
      }
      r1 = d1.data();
      r2 = d2.data();
    }
    const auto b0 = event_begin_[g], b1 = event_begin_[g + 1];
    const double d = static_cast<double>(b1 - b0);
    double sum_eta = 0.0;
    std::fill(ev_x.begin(), ev_x.end(), 0.0);
    for (auto e = b0; e < b1; ++e) {
      const auto r = event_rows_[e];
      sum_eta += eta_v[r];
      if (derivatives) {
        for (std::size_t a = 0; a < k; ++a) ev_x[a] += x_[r * p_ + a];
      }
    }
    ev.loglik += sum_eta - d * (std::log(r0) + shift);
    if (!derivatives) continue;
    for (std::size_t a = 0; a < k; ++a) {
      const double mean_a = r1[a] / r0;
      ev.score[static_cast<Eigen::Index>(a)] += ev_x[a] - d * mean_a;
      for (std::size_t b = 0; b <= a; ++b) {
        const double v = d * (r2[a * k + b] / r0 - mean_a * (r1[b] / r0));
        ev.information(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) += v;
      }
    }
  }
  if (derivatives) {
    ev.information.triangularView<Eigen::StrictlyUpper>() =
        ev.information.triangularView<Eigen::StrictlyLower>().transpose();
  }
  return ev;
}

double CoxProblem::loglik(const Eigen::VectorXd& beta) const {
  return evaluate(beta, static_cast<std::size_t>(beta.size()), false).loglik;
}

BaselineHazard CoxProblem::breslow(const Eigen::VectorXd& beta, std::size_t cols) const {
  const auto n = start_.size();
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = std::exp(eta(i, beta.data(), cols));
  const auto groups = event_times_desc_.size();
  std::vector<double> increments(groups);
  double s0 = 0.0;
  std::size_t ia = 0, ir = 0;
  for (std::size_t g = 0; g < groups; ++g) {
    const double tau = event_times_desc_[g];
    while (ia < n && stop_[by_stop_desc_[ia]] >= tau) s0 += w[by_stop_desc_[ia++]];
    while (ir < n && start_[by_start_desc_[ir]] >= tau) s0 -= w[by_start_desc_[ir++]];
    double r0 = s0;
    if (!(r0 > 0.0)) {
      r0 = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (start_[i] < tau && tau <= stop_[i]) r0 += w[i];
      }
    }
    increments[g] = static_cast<double>(event_begin_[g + 1] - event_begin_[g]) / r0;
  }
  BaselineHazard h;
  h.event_times.assign(event_times_desc_.rbegin(), event_times_desc_.rend());
  h.cumulative_hazard.resize(groups);
  double cum = 0.0;
  for (std::size_t g = 0; g < groups; ++g) {
    cum += increments[groups - 1 - g];
    h.cumulative_hazard[g] = cum;
  }
  return h;
}

CoxFit CoxProblem::fit(std::vector<std::string> names, std::size_t cols,
                       const Eigen::VectorXd* init, const CoxOptions& options) const {
  if (names.size() != cols || cols > p_) {
    throw Error(ErrorKind::Shape, "cox: name count does not match the design columns");
  }
  if (n_events_ == 0) throw Error(ErrorKind::InsufficientEvents, "cox: no events");
  for (std::size_t j = 0; j < cols; ++j) {
    if (column_is_constant(j)) {
      throw Error(ErrorKind::DegenerateDesign, "cox: covariate '" + names[j] + "' is constant");
    }
  }
  const auto k = static_cast<Eigen::Index>(cols);
  CoxFit fit;
  fit.names = std::move(names);
  fit.n_events = n_events_;
  Eigen::VectorXd beta = init != nullptr && init->size() == k ? *init : Eigen::VectorXd::Zero(k);
  auto ev = evaluate(beta, cols);
  if (!std::isfinite(ev.loglik)) {
    beta.setZero();
    ev = evaluate(beta, cols);
  }

  bool converged = k == 0 || ev.score.cwiseAbs().maxCoeff() <= options.gradient_tol;
  int iter = 0;
  while (!converged && iter < options.max_iterations) {
    ++iter;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(ev.information);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) break;
    const Eigen::VectorXd step = ldlt.solve(ev.score);
    if (!step.allFinite()) break;
    double scale = 1.0;
    bool accepted = false;
    Evaluation next;
    Eigen::VectorXd trial;
    for (int h = 0; h <= options.max_halvings; ++h) {
      trial = beta + scale * step;
      next = evaluate(trial, cols);
      if (std::isfinite(next.loglik) &&
          next.loglik >= ev.loglik - 1e-12 * std::abs(ev.loglik)) {
        accepted = true;
        break;
      }
      scale *= 0.5;
    }
    if (!accepted) break;
    const double change = next.loglik - ev.loglik;
    beta = trial;
    ev = std::move(next);
    const bool small_change = std::abs(change) <= options.loglik_rel_tol * std::abs(ev.loglik);
    if (small_change && ev.score.cwiseAbs().maxCoeff() <= options.gradient_tol) converged = true;
  }

  fit.iterations = iter;
  fit.coefficients = beta;
  fit.log_partial_lik = ev.loglik;
  fit.monotone = k > 0 && beta.cwiseAbs().maxCoeff() > options.divergence_bound;
  fit.converged = converged && !fit.monotone;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(ev.information);
  // A zero pivot means some direction carries no information (for example
  // every risk set holds only its event row): the maximizer is not unique.
  const bool identified = k > 0 && ldlt.info() == Eigen::Success && ldlt.isPositive() &&
                          ldlt.vectorD().minCoeff() > 1e-12 * std::max(1.0, ldlt.vectorD().maxCoeff());
  if (identified) {
    fit.vcov = ldlt.solve(Eigen::MatrixXd::Identity(k, k));
    fit.vcov = 0.5 * (fit.vcov + fit.vcov.transpose()).eval();
  } else {
    fit.vcov = Eigen::MatrixXd::Constant(k, k, std::numeric_limits<double>::infinity());
    if (k > 0) fit.converged = false;
  }
  fit.baseline = breslow(beta, cols);
  return fit;
}

// ---------------------------------------------------------------------------
// Dataset-level wrappers

Eigen::MatrixXd design_matrix(const LtrcDataset& data, const std::vector<std::string>& names) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(data.size()), static_cast<Eigen::Index>(names.size()));
  for (std::size_t j = 0; j < names.size(); ++j) {
    x.col(static_cast<Eigen::Index>(j)) =
        data.covariates.col(static_cast<Eigen::Index>(data.covariate_index(names[j])));
  }
  return x;
}

CoxFit fit_cox(const LtrcDataset& data, const std::vector<std::string>& covariate_names,
               std::span<const double> offsets, const CoxOptions& options) {
  CoxProblem problem(data.start, data.stop, data.status, design_matrix(data, covariate_names),
                     offsets);
  return problem.fit(covariate_names, covariate_names.size(), nullptr, options);
}

double loglik_at(const LtrcDataset& data, const std::vector<std::string>& covariate_names,
                 const Eigen::VectorXd& coefficients) {
  if (static_cast<std::size_t>(coefficients.size()) != covariate_names.size()) {
    throw Error(ErrorKind::Shape, "loglik_at: coefficient length does not match covariate list");
  }
  CoxProblem problem(data.start, data.stop, data.status, design_matrix(data, covariate_names));
  return problem.loglik(coefficients);
}

// ---------------------------------------------------------------------------
// Prediction

std::size_t CovariatePath::piece_at(double t) const {
  // Last piece with start < t; the first piece covers everything before it.
  auto it = std::lower_bound(starts.begin(), starts.end(), t);
  if (it == starts.begin()) return 0;
  return static_cast<std::size_t>(it - starts.begin()) - 1;
}

double hazard_multiplier(const CoxFit& fit, const std::vector<std::string>& names,
                         std::span<const double> values) {
  double lp = 0.0;
  for (std::size_t j = 0; j < fit.names.size(); ++j) {
    auto it = std::find(names.begin(), names.end(), fit.names[j]);
    if (it == names.end()) {
      throw Error(ErrorKind::MissingColumn, "covariate '" + fit.names[j] + "' missing from path");
    }
    lp += fit.coefficients[static_cast<Eigen::Index>(j)] *
          values[static_cast<std::size_t>(it - names.begin())];
  }
  return std::exp(lp);
}

Curve predict_survival(const CoxFit& fit, const CovariatePath& path, double horizon) {
  if (!(horizon > 0.0)) throw Error(ErrorKind::Usage, "predict_survival: horizon must be positive");
  if (path.starts.empty() || path.values.size() != path.starts.size()) {
    throw Error(ErrorKind::Shape, "predict_survival: empty or malformed covariate path");
  }
  std::vector<double> multipliers;
  multipliers.reserve(path.values.size());
  for (const auto& v : path.values) multipliers.push_back(hazard_multiplier(fit, path.names, v));

  std::vector<double> times, values;
  double cum = 0.0, prev = 0.0;
  const auto& bh = fit.baseline;
  for (std::size_t g = 0; g < bh.event_times.size(); ++g) {
    const double tau = bh.event_times[g];
    if (tau > horizon) break;
    const double inc = bh.cumulative_hazard[g] - prev;
    prev = bh.cumulative_hazard[g];
    if (inc <= 0.0) continue;
    cum += inc * multipliers[path.piece_at(tau)];
    times.push_back(tau);
    values.push_back(std::exp(-cum));
  }
  return Curve::step(std::move(times), std::move(values), 1.0, horizon);
}

}  // namespace jlct
