#include "jlct/splitting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "jlct/error.hpp"
#include "jlct/parallel.hpp"

namespace jlct {

const char* to_string(TestReason reason) {
  switch (reason) {
    case TestReason::Valid: return "valid";
    case TestReason::TooFewEvents: return "too-few-events";
    case TestReason::NonConvergence: return "non-convergence";
    case TestReason::VarianceBound: return "variance-bound";
    case TestReason::DegenerateDesign: return "degenerate-design";
  }
  return "unknown";
}

void SplitControls::validate() const {
  if (min_node_rows < 1 || min_events < 0 || !(variance_bound > 0.0) ||
      !(stop_threshold > 0.0) || max_terminal_nodes < 1) {
    throw Error(ErrorKind::Usage, "split controls must be positive");
  }
}

// ---------------------------------------------------------------------------
// NodeData

NodeData::NodeData(const LtrcDataset& data, const std::vector<std::string>& survival_vars,
                   const std::vector<std::string>& split_vars)
    : survival_vars_(survival_vars), split_vars_(split_vars), status_(data.status) {
  const auto n = static_cast<Eigen::Index>(data.size());
  const auto ns = static_cast<Eigen::Index>(survival_vars.size());
  Eigen::MatrixXd design(n, ns + 1);
  design.leftCols(ns) = design_matrix(data, survival_vars);
  design.col(ns) = Eigen::Map<const Eigen::VectorXd>(data.outcome.data(), n);
  problem_ = CoxProblem(data.start, data.stop, data.status, design);
  split_values_ = design_matrix(data, split_vars);
  origin_.resize(data.size());
  std::iota(origin_.begin(), origin_.end(), std::size_t{0});
}

NodeData NodeData::subset(const std::vector<std::size_t>& rows) const {
  NodeData out;
  out.problem_ = problem_.subset(rows);
  out.survival_vars_ = survival_vars_;
  out.split_vars_ = split_vars_;
  out.split_values_.resize(static_cast<Eigen::Index>(rows.size()), split_values_.cols());
  out.status_.reserve(rows.size());
  out.origin_.reserve(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    out.split_values_.row(static_cast<Eigen::Index>(k)) =
        split_values_.row(static_cast<Eigen::Index>(rows[k]));
    out.status_.push_back(status_[rows[k]]);
    out.origin_.push_back(origin_[rows[k]]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Node test

namespace {

bool within_variance_bound(const CoxFit& fit, double bound) {
  for (Eigen::Index j = 0; j < fit.vcov.rows(); ++j) {
    const double v = fit.vcov(j, j);
    if (!std::isfinite(v) || v > bound) return false;
  }
  return true;
}

NodeTest test_problem(const CoxProblem& problem, const std::vector<std::string>& survival_vars,
                      const SplitControls& controls, const NodeTest* warm) {
  NodeTest t;
  t.n_rows = problem.n_rows();
  t.n_events = problem.n_events();
  const auto ns = survival_vars.size();
  if (t.n_events < controls.effective_min_events(ns) || t.n_events == 0) {
    t.reason = TestReason::TooFewEvents;
    return t;
  }
  for (std::size_t j = 0; j <= ns; ++j) {
    if (problem.column_is_constant(j)) {
      t.reason = TestReason::DegenerateDesign;
      return t;
    }
  }
  auto full_names = survival_vars;
  full_names.emplace_back("<outcome>");
  const Eigen::VectorXd* full_init =
      warm != nullptr && warm->full_fit.coefficients.size() == static_cast<Eigen::Index>(ns + 1)
          ? &warm->full_fit.coefficients
          : nullptr;
  const Eigen::VectorXd* null_init =
      warm != nullptr && warm->null_fit.coefficients.size() == static_cast<Eigen::Index>(ns)
          ? &warm->null_fit.coefficients
          : nullptr;
  t.full_fit = problem.fit(std::move(full_names), ns + 1, full_init);
  t.null_fit = problem.fit(survival_vars, ns, null_init);
  t.ts = std::max(0.0, 2.0 * (t.full_fit.log_partial_lik - t.null_fit.log_partial_lik));
  if (!t.full_fit.converged || !t.null_fit.converged) {
    t.reason = TestReason::NonConvergence;
  } else if (!within_variance_bound(t.full_fit, controls.variance_bound) ||
             !within_variance_bound(t.null_fit, controls.variance_bound)) {
    t.reason = TestReason::VarianceBound;
  } else {
    t.valid = true;
  }
  return t;
}

}  // namespace

NodeTest node_test(const NodeData& node, const SplitControls& controls, const NodeTest* warm_start) {
  return test_problem(node.problem(), node.survival_vars(), controls, warm_start);
}

NodeTest node_test(const LtrcDataset& rows, const std::vector<std::string>& survival_vars,
                   const SplitControls& controls) {
  if (rows.size() == 0) throw Error(ErrorKind::Shape, "node_test: empty node");
  return node_test(NodeData(rows, survival_vars, {}), controls);
}

// ---------------------------------------------------------------------------
// Thresholds

std::vector<double> enumerate_thresholds(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  std::vector<double> out;
  for (std::size_t k = 1; k < values.size(); ++k) {
    const double mid = 0.5 * (values[k - 1] + values[k]);
    if (out.empty() || mid != out.back()) out.push_back(mid);
  }
  return out;
}

std::vector<double> enumerate_thresholds(const LtrcDataset& rows, const std::string& variable) {
  const auto j = static_cast<Eigen::Index>(rows.covariate_index(variable));
  std::vector<double> values(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) values[r] = rows.covariates(static_cast<Eigen::Index>(r), j);
  return enumerate_thresholds(std::move(values));
}

// ---------------------------------------------------------------------------
// Best split

namespace {

struct Candidate {
  std::size_t var = 0;
  double threshold = 0.0;
  double score = -std::numeric_limits<double>::infinity();
  bool valid = false;
};

void partition(const NodeData& node, std::size_t var, double threshold,
               std::vector<std::size_t>& left, std::vector<std::size_t>& right) {
  left.clear();
  right.clear();
  for (std::size_t r = 0; r < node.n_rows(); ++r) {
    (node.split_value(r, var) <= threshold ? left : right).push_back(r);
  }
}

}  // namespace

std::optional<SplitCandidate> best_split(const NodeData& node, const SplitControls& controls,
                                         const NodeTest& parent) {
  if (!parent.valid || parent.ts < controls.stop_threshold) return std::nullopt;
  const auto n = node.n_rows();
  const int min_events = controls.effective_min_events(node.n_survival());

  // Candidate list in (variable order, ascending threshold) order, screened on
  // child sizes and event counts before any fitting.
  std::vector<Candidate> candidates;
  for (std::size_t var = 0; var < node.split_vars().size(); ++var) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return node.split_value(a, var) < node.split_value(b, var);
    });
    int events_left = 0;
    const int events_total = node.problem().n_events();
    for (std::size_t m = 1; m <= n; ++m) {
      events_left += node.status(order[m - 1]);
      if (m == n) break;
      const double lo = node.split_value(order[m - 1], var);
      const double hi = node.split_value(order[m], var);
      if (!(hi > lo)) continue;
      const std::size_t right_rows = n - m;
      if (m < controls.min_node_rows || right_rows < controls.min_node_rows) continue;
      if (events_left < min_events || events_total - events_left < min_events) continue;
      candidates.push_back(Candidate{var, 0.5 * (lo + hi)});
    }
  }

  parallel_for(candidates.size(), controls.threads, [&](std::size_t c) {
    auto& cand = candidates[c];
    std::vector<std::size_t> left, right;
    partition(node, cand.var, cand.threshold, left, right);
    const auto lt = test_problem(node.problem().subset(left), node.survival_vars(), controls, &parent);
    if (!lt.valid) return;
    const auto rt = test_problem(node.problem().subset(right), node.survival_vars(), controls, &parent);
    if (!rt.valid) return;
    cand.valid = true;
    cand.score = parent.ts - lt.ts - rt.ts;
  });

  const Candidate* best = nullptr;
  for (const auto& cand : candidates) {
    if (cand.valid && (best == nullptr || cand.score > best->score)) best = &cand;
  }
  if (best == nullptr) return std::nullopt;

  SplitCandidate out;
  out.variable = node.split_vars()[best->var];
  out.threshold = best->threshold;
  out.score = best->score;
  partition(node, best->var, best->threshold, out.left_rows, out.right_rows);
  out.left_test = test_problem(node.problem().subset(out.left_rows), node.survival_vars(), controls, &parent);
  out.right_test = test_problem(node.problem().subset(out.right_rows), node.survival_vars(), controls, &parent);
  return out;
}

std::optional<SplitCandidate> best_split(const LtrcDataset& rows, const VariableRoles& roles,
                                         const SplitControls& controls, const NodeTest& parent) {
  return best_split(NodeData(rows, roles.survival_vars, roles.split_vars), controls, parent);
}

}  // namespace jlct
