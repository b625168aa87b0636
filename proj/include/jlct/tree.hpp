#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "jlct/coxph.hpp"
#include "jlct/curve.hpp"
#include "jlct/data.hpp"
#include "jlct/lmm.hpp"
#include "jlct/splitting.hpp"

namespace jlct {

/// Why a node is (or is not) terminal.
enum class Closure {
  Internal,
  BelowThreshold,  // TS < stop threshold
  Screen,          // invalid test or no admissible split
  Pruned,
};

const char* to_string(Closure closure);
Closure closure_from_string(const std::string& s);

struct TreeSplit {
  std::string variable;
  double threshold = 0.0;
  double score = 0.0;
};

struct TreeNode {
  int id = 0;
  int depth = 0;
  NodeTest test;
  std::optional<TreeSplit> split;
  std::optional<std::pair<int, int>> children;
  double row_fraction = 0.0;
  Closure closure = Closure::BelowThreshold;

  bool is_leaf() const { return !children.has_value(); }
};

struct LeafModel {
  CoxFit cox;
  bool flagged = false;  // fit failed; predictions use the root fit
};

struct JlctTree {
  std::map<int, TreeNode> nodes;
  int root_id = 0;
  VariableRoles roles;
  SplitControls controls;

  bool has_models = false;
  bool shared_baseline = false;
  std::map<int, LeafModel> leaf_models;
  CoxFit root_fit;
  LmmFit longitudinal;

  std::vector<int> leaves() const;
  std::size_t n_leaves() const { return leaves().size(); }

  /// Leaf reached by a row whose covariates are `values` (aligned with `names`).
  int route(const std::vector<std::string>& names, std::span<const double> values) const;

  /// Cox model used for predictions in `leaf` (root fit for flagged leaves).
  const CoxFit& leaf_cox(int leaf) const;
};

/// Depth-first recursive growth, left child first; ids follow creation order.
JlctTree grow(const LtrcDataset& data, const VariableRoles& roles, const SplitControls& controls);

/// Collapses smallest-score splits whose children are both leaves until at
/// most `max_leaves` remain (ties: larger node id first).
JlctTree prune_to(const JlctTree& tree, std::size_t max_leaves);

std::vector<int> assign(const JlctTree& tree, const LtrcDataset& rows);
/// One leaf id per record, in dataset order.
std::vector<int> assign(const JlctTree& tree, const LongDataset& data);

JlctTree fit_leaf_models(const JlctTree& tree, const LtrcDataset& data, const LongDataset& long_data,
                         bool shared_baseline);

struct SubjectPrediction {
  Curve survival;
  std::vector<double> outcome;  // one per record
  std::vector<int> leaves;      // one per record
};

/// Routes each record to a leaf, chains the leaves' hazards over the
/// inter-measurement intervals (last covariates carried forward to
/// `horizon`), and predicts the outcome with the mixed model. The subject
/// intercept is used only when `subject_effects` knows the subject.
SubjectPrediction predict(const JlctTree& tree, const std::vector<std::string>& covariate_names,
                          const SubjectRecords& subject, double horizon,
                          const std::map<std::string, double>* subject_effects = nullptr);

/// Box-per-node text rendering (TS and row share per node).
std::string render_text(const JlctTree& tree);

}  // namespace jlct
