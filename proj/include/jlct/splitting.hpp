#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "jlct/coxph.hpp"
#include "jlct/data.hpp"

namespace jlct {

enum class TestReason {
  Valid,
  TooFewEvents,
  NonConvergence,
  VarianceBound,
  DegenerateDesign,
};

const char* to_string(TestReason reason);

/// Likelihood-ratio test of the longitudinal outcome's coefficient in a Cox
/// model that also carries the survival covariates, fitted on one node.
struct NodeTest {
  double ts = 0.0;
  CoxFit full_fit;  // survival covariates + outcome
  CoxFit null_fit;  // survival covariates only
  bool valid = false;
  TestReason reason = TestReason::Valid;
  int n_events = 0;
  std::size_t n_rows = 0;
};

struct SplitControls {
  std::size_t min_node_rows = 20;
  int min_events = 0;  // 0: number of Cox covariates in the splitting model
  double variance_bound = 1e5;
  double stop_threshold = 3.84;
  std::size_t max_terminal_nodes = 6;
  int threads = 1;

  int effective_min_events(std::size_t n_survival_vars) const {
    return min_events > 0 ? min_events : static_cast<int>(n_survival_vars) + 1;
  }
  void validate() const;
};

struct SplitCandidate {
  std::string variable;
  double threshold = 0.0;
  double score = 0.0;
  NodeTest left_test;
  NodeTest right_test;
  std::vector<std::size_t> left_rows;  // positions within the node's rows
  std::vector<std::size_t> right_rows;
};

/// Rows of one node prepared for repeated Cox fits: the design holds the
/// survival covariates followed by the outcome, so the null model is its
/// leading block.
class NodeData {
 public:
  NodeData(const LtrcDataset& data, const std::vector<std::string>& survival_vars,
           const std::vector<std::string>& split_vars);

  NodeData subset(const std::vector<std::size_t>& rows) const;

  const CoxProblem& problem() const { return problem_; }
  std::size_t n_rows() const { return problem_.n_rows(); }
  std::size_t n_survival() const { return survival_vars_.size(); }
  const std::vector<std::string>& survival_vars() const { return survival_vars_; }
  const std::vector<std::string>& split_vars() const { return split_vars_; }
  /// Row positions (within the originating dataset) of this node's rows.
  const std::vector<std::size_t>& origin() const { return origin_; }
  double split_value(std::size_t row, std::size_t var) const {
    return split_values_(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(var));
  }
  int status(std::size_t row) const { return status_[row]; }

 private:
  NodeData() = default;

  CoxProblem problem_;
  std::vector<std::string> survival_vars_;
  std::vector<std::string> split_vars_;
  Eigen::MatrixXd split_values_;
  std::vector<int> status_;
  std::vector<std::size_t> origin_;
};

NodeTest node_test(const NodeData& node, const SplitControls& controls,
                   const NodeTest* warm_start = nullptr);

NodeTest node_test(const LtrcDataset& rows, const std::vector<std::string>& survival_vars,
                   const SplitControls& controls);

/// Midpoints between consecutive distinct values; empty for a constant column.
std::vector<double> enumerate_thresholds(const LtrcDataset& rows, const std::string& variable);
std::vector<double> enumerate_thresholds(std::vector<double> values);

std::optional<SplitCandidate> best_split(const NodeData& node, const SplitControls& controls,
                                         const NodeTest& parent);

std::optional<SplitCandidate> best_split(const LtrcDataset& rows, const VariableRoles& roles,
                                         const SplitControls& controls, const NodeTest& parent);

}  // namespace jlct
