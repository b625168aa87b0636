#include "jlct/lmm.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Cholesky>
#include <boost/math/tools/minima.hpp>

#include "jlct/error.hpp"

namespace jlct {

namespace {

std::string class_name(int cls) { return "class[" + std::to_string(cls) + "]"; }

/// All candidate columns before rank screening.
std::vector<std::string> full_column_names(const std::vector<std::string>& fixed,
                                           const std::vector<std::string>& random,
                                           const std::vector<int>& classes) {
  std::vector<std::string> names{"(Intercept)"};
  names.insert(names.end(), fixed.begin(), fixed.end());
  for (std::size_t g = 1; g < classes.size(); ++g) {
    names.push_back(class_name(classes[g]));
    for (const auto& r : random) names.push_back(class_name(classes[g]) + ":" + r);
  }
  return names;
}

/// Builds one design row for the kept columns.
class DesignBuilder {
 public:
  DesignBuilder(const LmmFit& fit, const LongDataset& data) : fit_(fit) {
    for (const auto& v : fit.fixed_vars) fixed_idx_.push_back(data.covariate_index(v));
    for (const auto& v : fit.random_vars) random_idx_.push_back(data.covariate_index(v));
    const auto full = full_column_names(fit.fixed_vars, fit.random_vars, fit.classes);
    for (const auto& name : fit.column_names) {
      keep_.push_back(static_cast<std::size_t>(std::find(full.begin(), full.end(), name) - full.begin()));
    }
    full_size_ = full.size();
  }

  void row(const LongRecord& rec, int cls, Eigen::Ref<Eigen::VectorXd> out) const {
    full_.assign(full_size_, 0.0);
    full_[0] = 1.0;
    std::size_t c = 1;
    for (auto j : fixed_idx_) full_[c++] = rec.covariates[j];
    auto it = std::find(fit_.classes.begin(), fit_.classes.end(), cls);
    if (it == fit_.classes.end()) {
      throw Error(ErrorKind::UnknownClass, "mixed model has no class " + std::to_string(cls));
    }
    const auto g = static_cast<std::size_t>(it - fit_.classes.begin());
    if (g > 0) {
      const auto base = c + (g - 1) * (1 + random_idx_.size());
      full_[base] = 1.0;
      for (std::size_t r = 0; r < random_idx_.size(); ++r) full_[base + 1 + r] = rec.covariates[random_idx_[r]];
    }
    for (std::size_t k = 0; k < keep_.size(); ++k) out[static_cast<Eigen::Index>(k)] = full_[keep_[k]];
  }

 private:
  const LmmFit& fit_;
  std::vector<std::size_t> fixed_idx_, random_idx_, keep_;
  std::size_t full_size_ = 0;
  mutable std::vector<double> full_;
};

/// Per-subject sufficient statistics: X'X, X'1, X'y, y'y, 1'y, n.
struct SubjectStats {
  Eigen::MatrixXd xtx;
  Eigen::VectorXd xt1, xty;
  double yty = 0.0, y1 = 0.0;
  double n = 0.0;
};

std::vector<SubjectStats> subject_stats(const LmmFit& fit, const LongDataset& data,
                                        std::span<const int> memberships) {
  DesignBuilder builder(fit, data);
  const auto p = static_cast<Eigen::Index>(fit.column_names.size());
  std::vector<SubjectStats> stats;
  stats.reserve(data.n_subjects());
  Eigen::VectorXd x(p);
  std::size_t rec_index = 0;
  for (const auto& s : data.subjects()) {
    SubjectStats st;
    st.xtx = Eigen::MatrixXd::Zero(p, p);
    st.xt1 = Eigen::VectorXd::Zero(p);
    st.xty = Eigen::VectorXd::Zero(p);
    for (const auto& rec : s.records) {
      builder.row(rec, memberships[rec_index++], x);
      st.xtx.selfadjointView<Eigen::Lower>().rankUpdate(x);
      st.xt1 += x;
      st.xty += rec.outcome * x;
      st.yty += rec.outcome * rec.outcome;
      st.y1 += rec.outcome;
      st.n += 1.0;
    }
    st.xtx = st.xtx.selfadjointView<Eigen::Lower>();
    stats.push_back(std::move(st));
  }
  return stats;
}

struct ProfilePoint {
  double loglik = 0.0;
  double sigma2 = 0.0;
  Eigen::VectorXd beta;
};

ProfilePoint profile(const std::vector<SubjectStats>& stats, double ratio, double floor) {
  const auto p = stats.front().xtx.rows();
  Eigen::MatrixXd xwx = Eigen::MatrixXd::Zero(p, p);
  Eigen::VectorXd xwy = Eigen::VectorXd::Zero(p);
  double ywy = 0.0, n_total = 0.0, logdet = 0.0;
  for (const auto& st : stats) {
    const double c = ratio / (1.0 + ratio * st.n);
    xwx += st.xtx - c * st.xt1 * st.xt1.transpose();
    xwy += st.xty - c * st.y1 * st.xt1;
    ywy += st.yty - c * st.y1 * st.y1;
    n_total += st.n;
    logdet += std::log1p(ratio * st.n);
  }
  ProfilePoint pt;
  pt.beta = xwx.ldlt().solve(xwy);
  const double rss = std::max(ywy - pt.beta.dot(xwy), 0.0);
  pt.sigma2 = std::max(rss / n_total, floor);
  pt.loglik = -0.5 * n_total * (std::log(2.0 * std::numbers::pi * pt.sigma2) + 1.0) - 0.5 * logdet;
  return pt;
}

}  // namespace

std::vector<double> LmmFit::class_effect(int cls) const {
  std::vector<double> out(1 + random_vars.size(), 0.0);
  auto it = std::find(classes.begin(), classes.end(), cls);
  if (it == classes.end()) throw Error(ErrorKind::UnknownClass, "unknown class " + std::to_string(cls));
  if (it == classes.begin()) return out;
  auto lookup = [&](const std::string& col) {
    auto c = std::find(column_names.begin(), column_names.end(), col);
    return c == column_names.end() ? 0.0 : coefficients[c - column_names.begin()];
  };
  out[0] = lookup(class_name(cls));
  for (std::size_t r = 0; r < random_vars.size(); ++r) out[r + 1] = lookup(class_name(cls) + ":" + random_vars[r]);
  return out;
}

double LmmFit::coefficient(const std::string& column) const {
  auto c = std::find(column_names.begin(), column_names.end(), column);
  if (c == column_names.end()) throw Error(ErrorKind::MissingColumn, "no column '" + column + "'");
  return coefficients[c - column_names.begin()];
}

LmmFit fit_lmm(const LongDataset& data, std::span<const int> memberships,
               const std::vector<std::string>& fixed_vars, const std::vector<std::string>& random_vars,
               const LmmOptions& options) {
  if (memberships.size() != data.n_records()) {
    throw Error(ErrorKind::Shape, "fit_lmm: one class id per record required");
  }
  if (data.n_subjects() < 2) {
    throw Error(ErrorKind::Unfittable, "fit_lmm: at least two subjects are needed to separate the variances");
  }
  LmmFit fit;
  fit.fixed_vars = fixed_vars;
  fit.random_vars = random_vars;
  fit.classes.assign(memberships.begin(), memberships.end());
  std::sort(fit.classes.begin(), fit.classes.end());
  fit.classes.erase(std::unique(fit.classes.begin(), fit.classes.end()), fit.classes.end());

  // Greedy rank screen in column order (Gram-Schmidt on the full design).
  fit.column_names = full_column_names(fixed_vars, random_vars, fit.classes);
  const auto n = static_cast<Eigen::Index>(data.n_records());
  const auto p_full = static_cast<Eigen::Index>(fit.column_names.size());
  Eigen::MatrixXd x(n, p_full);
  {
    DesignBuilder builder(fit, data);
    Eigen::VectorXd row(p_full);
    Eigen::Index i = 0;
    for (const auto& s : data.subjects()) {
      for (const auto& rec : s.records) {
        builder.row(rec, memberships[static_cast<std::size_t>(i)], row);
        x.row(i++) = row;
      }
    }
  }
  std::vector<std::string> kept;
  Eigen::MatrixXd basis(n, 0);
  for (Eigen::Index j = 0; j < p_full; ++j) {
    Eigen::VectorXd v = x.col(j);
    const double norm0 = v.norm();
    for (int pass = 0; pass < 2; ++pass) {
      for (Eigen::Index b = 0; b < basis.cols(); ++b) v -= basis.col(b).dot(v) * basis.col(b);
    }
    if (norm0 > 0.0 && v.norm() > 1e-9 * norm0) {
      basis.conservativeResize(n, basis.cols() + 1);
      basis.col(basis.cols() - 1) = v / v.norm();
      kept.push_back(fit.column_names[static_cast<std::size_t>(j)]);
    } else {
      fit.dropped_columns.push_back(fit.column_names[static_cast<std::size_t>(j)]);
    }
  }
  fit.column_names = std::move(kept);

  const auto stats = subject_stats(fit, data, memberships);
  auto neg = [&](double log_ratio) {
    return -profile(stats, std::exp(log_ratio), options.variance_floor).loglik;
  };
  const double lo = std::log(options.min_ratio), hi = std::log(options.max_ratio);
  // Coarse scan, then Brent inside the best bracket.
  constexpr int kGrid = 41;
  int best = 0;
  std::vector<double> values(kGrid);
  for (int k = 0; k < kGrid; ++k) {
    values[static_cast<std::size_t>(k)] = neg(lo + (hi - lo) * k / (kGrid - 1));
    if (values[static_cast<std::size_t>(k)] < values[static_cast<std::size_t>(best)]) best = k;
  }
  const double a = lo + (hi - lo) * std::max(best - 1, 0) / (kGrid - 1);
  const double b = lo + (hi - lo) * std::min(best + 1, kGrid - 1) / (kGrid - 1);
  const auto [arg, value] = boost::math::tools::brent_find_minima(neg, a, b, 52);
  double ratio = std::exp(arg);
  const double step = (hi - lo) / (kGrid - 1);
  fit.boundary = arg <= lo + 1e-3 * step || arg >= hi - 1e-3 * step;
  auto pt = profile(stats, ratio, options.variance_floor);
  const auto ols = profile(stats, 0.0, options.variance_floor);
  if (ols.loglik > pt.loglik) {
    ratio = 0.0;
    pt = ols;
    fit.boundary = true;
  }
  (void)value;
  fit.variance_ratio = ratio;
  fit.coefficients = pt.beta;
  fit.var_resid = pt.sigma2;
  fit.var_subject = ratio * pt.sigma2;
  fit.loglik = pt.loglik;

  std::vector<double> intercepts;
  for (int cls : fit.classes) intercepts.push_back(fit.class_effect(cls)[0]);
  if (intercepts.size() > 1) {
    double mean = 0.0;
    for (double v : intercepts) mean += v;
    mean /= static_cast<double>(intercepts.size());
    double ss = 0.0;
    for (double v : intercepts) ss += (v - mean) * (v - mean);
    fit.var_class = ss / static_cast<double>(intercepts.size() - 1);
  }

  // BLUPs: v_i = ratio / (1 + ratio n_i) * sum of residuals.
  DesignBuilder builder(fit, data);
  Eigen::VectorXd row(static_cast<Eigen::Index>(fit.column_names.size()));
  std::size_t rec_index = 0;
  for (const auto& s : data.subjects()) {
    double resid = 0.0;
    for (const auto& rec : s.records) {
      builder.row(rec, memberships[rec_index++], row);
      resid += rec.outcome - row.dot(fit.coefficients);
    }
    const double n_i = static_cast<double>(s.records.size());
    fit.subject_effects[s.id] = ratio / (1.0 + ratio * n_i) * resid;
  }
  return fit;
}

double lmm_profile_loglik(const LongDataset& data, std::span<const int> memberships,
                          const LmmFit& fit, double ratio) {
  return profile(subject_stats(fit, data, memberships), ratio, LmmOptions{}.variance_floor).loglik;
}

Eigen::VectorXd predict_lmm(const LmmFit& fit, const LongDataset& data,
                            std::span<const int> memberships,
                            const std::map<std::string, double>* subject_effects) {
  if (memberships.size() != data.n_records()) {
    throw Error(ErrorKind::Shape, "predict_lmm: one class id per record required");
  }
  DesignBuilder builder(fit, data);
  Eigen::VectorXd out(static_cast<Eigen::Index>(data.n_records()));
  Eigen::VectorXd row(static_cast<Eigen::Index>(fit.column_names.size()));
  std::size_t i = 0;
  for (const auto& s : data.subjects()) {
    double v = 0.0;
    if (subject_effects != nullptr) {
      auto it = subject_effects->find(s.id);
      if (it != subject_effects->end()) v = it->second;
    }
    for (const auto& rec : s.records) {
      builder.row(rec, memberships[i], row);
      out[static_cast<Eigen::Index>(i)] = row.dot(fit.coefficients) + v;
      ++i;
    }
  }
  return out;
}

}  // namespace jlct
