#include "jlct/tree.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>

#include "jlct/error.hpp"

namespace jlct {

const char* to_string(Closure closure) {
  switch (closure) {
    case Closure::Internal: return "internal";
    case Closure::BelowThreshold: return "ts-below-threshold";
    case Closure::Screen: return "screen";
    case Closure::Pruned: return "pruned";
  }
  return "unknown";
}

Closure closure_from_string(const std::string& s) {
  for (auto c : {Closure::Internal, Closure::BelowThreshold, Closure::Screen, Closure::Pruned}) {
    if (s == to_string(c)) return c;
  }
  throw Error(ErrorKind::Parse, "unknown closure '" + s + "'");
}

std::vector<int> JlctTree::leaves() const {
  std::vector<int> out;
  for (const auto& [id, node] : nodes) {
    if (node.is_leaf()) out.push_back(id);
  }
  return out;
}

int JlctTree::route(const std::vector<std::string>& names, std::span<const double> values) const {
  int id = root_id;
  while (true) {
    const auto& node = nodes.at(id);
    if (node.is_leaf()) return id;
    const auto& var = node.split->variable;
    auto it = std::find(names.begin(), names.end(), var);
    if (it == names.end()) throw Error(ErrorKind::MissingColumn, "split variable '" + var + "' missing");
    const double v = values[static_cast<std::size_t>(it - names.begin())];
    id = v <= node.split->threshold ? node.children->first : node.children->second;
  }
}

const CoxFit& JlctTree::leaf_cox(int leaf) const {
  auto it = leaf_models.find(leaf);
  if (it == leaf_models.end() || it->second.flagged) return root_fit;
  return it->second.cox;
}

// ---------------------------------------------------------------------------
// Growth and pruning

JlctTree grow(const LtrcDataset& data, const VariableRoles& roles, const SplitControls& controls) {
  controls.validate();
  JlctTree tree;
  tree.roles = roles;
  tree.controls = controls;
  if (data.size() == 0) throw Error(ErrorKind::Unfittable, "grow: no rows");
  NodeData root(data, roles.survival_vars, roles.split_vars);
  NodeTest root_test = node_test(root, controls);
  if (!root_test.valid) {
    throw Error(ErrorKind::Unfittable,
                std::string("grow: root node test is invalid (") + to_string(root_test.reason) + ")");
  }
  const double total = static_cast<double>(data.size());
  int next_id = 0;
  std::function<int(const NodeData&, NodeTest, int)> grow_node =
      [&](const NodeData& nd, NodeTest test, int depth) -> int {
    const int id = next_id++;
    TreeNode node;
    node.id = id;
    node.depth = depth;
    node.row_fraction = static_cast<double>(nd.n_rows()) / total;
    node.test = std::move(test);
    if (!node.test.valid) {
      node.closure = Closure::Screen;
    } else if (node.test.ts < controls.stop_threshold) {
      node.closure = Closure::BelowThreshold;
    } else if (auto cand = best_split(nd, controls, node.test)) {
      node.closure = Closure::Internal;
      node.split = TreeSplit{cand->variable, cand->threshold, cand->score};
      tree.nodes[id] = node;
      const int l = grow_node(nd.subset(cand->left_rows), std::move(cand->left_test), depth + 1);
      const int r = grow_node(nd.subset(cand->right_rows), std::move(cand->right_test), depth + 1);
      tree.nodes[id].children = std::make_pair(l, r);
      return id;
    } else {
      node.closure = Closure::Screen;
    }
    tree.nodes[id] = std::move(node);
    return id;
  };
  tree.root_id = grow_node(root, std::move(root_test), 0);
  return tree;
}

JlctTree prune_to(const JlctTree& tree, std::size_t max_leaves) {
  if (max_leaves < 1) throw Error(ErrorKind::Usage, "prune_to: max_leaves must be >= 1");
  JlctTree out = tree;
  while (out.n_leaves() > max_leaves) {
    const TreeNode* victim = nullptr;
    for (const auto& [id, node] : out.nodes) {
      if (node.is_leaf()) continue;
      if (!out.nodes.at(node.children->first).is_leaf() ||
          !out.nodes.at(node.children->second).is_leaf()) {
        continue;
      }
      if (victim == nullptr || node.split->score < victim->split->score ||
          (node.split->score == victim->split->score && node.id > victim->id)) {
        victim = &node;
      }
    }
    auto& node = out.nodes.at(victim->id);
    out.nodes.erase(node.children->first);
    out.nodes.erase(node.children->second);
    out.leaf_models.erase(node.children->first);
    out.leaf_models.erase(node.children->second);
    node.children.reset();
    node.split.reset();
    node.closure = Closure::Pruned;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Assignment

std::vector<int> assign(const JlctTree& tree, const LtrcDataset& rows) {
  std::vector<int> out(rows.size());
  std::vector<double> values(rows.covariate_names.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t j = 0; j < values.size(); ++j) {
      values[j] = rows.covariates(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j));
    }
    out[r] = tree.route(rows.covariate_names, values);
  }
  return out;
}

std::vector<int> assign(const JlctTree& tree, const LongDataset& data) {
  std::vector<int> out;
  out.reserve(data.n_records());
  for (const auto& s : data.subjects()) {
    for (const auto& rec : s.records) out.push_back(tree.route(data.covariate_names(), rec.covariates));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Leaf models

namespace {

std::string leaf_column(const std::string& var, int leaf) {
  return var + "@leaf" + std::to_string(leaf);
}

void fit_shared(JlctTree& out, const LtrcDataset& data, const std::vector<int>& leaf_of_row,
                const std::vector<int>& leaves) {
  const auto& vars = out.roles.survival_vars;
  const auto n = static_cast<Eigen::Index>(data.size());
  const auto nv = static_cast<Eigen::Index>(vars.size());
  const Eigen::MatrixXd base = design_matrix(data, vars);
  Eigen::MatrixXd design = Eigen::MatrixXd::Zero(n, nv * static_cast<Eigen::Index>(leaves.size()));
  std::vector<std::string> names;
  for (std::size_t l = 0; l < leaves.size(); ++l) {
    for (const auto& v : vars) names.push_back(leaf_column(v, leaves[l]));
    for (Eigen::Index r = 0; r < n; ++r) {
      if (leaf_of_row[static_cast<std::size_t>(r)] == leaves[l]) {
        design.block(r, static_cast<Eigen::Index>(l) * nv, 1, nv) = base.row(r);
      }
    }
  }
  CoxFit joint;
  bool ok = true;
  try {
    CoxProblem problem(data.start, data.stop, data.status, design);
    joint = problem.fit(names, names.size());
    ok = joint.converged;
  } catch (const Error&) {
    ok = false;
  }
  for (std::size_t l = 0; l < leaves.size(); ++l) {
    LeafModel m;
    m.flagged = !ok;
    if (ok) {
      const auto off = static_cast<Eigen::Index>(l) * nv;
      m.cox.names = vars;
      m.cox.coefficients = joint.coefficients.segment(off, nv);
      m.cox.vcov = joint.vcov.block(off, off, nv, nv);
      m.cox.log_partial_lik = joint.log_partial_lik;
      m.cox.iterations = joint.iterations;
      m.cox.converged = joint.converged;
      m.cox.baseline = joint.baseline;
      int events = 0;
      for (std::size_t r = 0; r < data.size(); ++r) {
        if (leaf_of_row[r] == leaves[l]) events += data.status[r];
      }
      m.cox.n_events = events;
    }
    out.leaf_models[leaves[l]] = std::move(m);
  }
}

}  // namespace

JlctTree fit_leaf_models(const JlctTree& tree, const LtrcDataset& data, const LongDataset& long_data,
                         bool shared_baseline) {
  JlctTree out = tree;
  out.leaf_models.clear();
  out.shared_baseline = shared_baseline;
  out.root_fit = fit_cox(data, out.roles.survival_vars);
  const auto leaf_of_row = assign(out, data);
  const auto leaves = out.leaves();
  if (shared_baseline && leaves.size() > 1) {
    fit_shared(out, data, leaf_of_row, leaves);
  } else {
    for (int leaf : leaves) {
      std::vector<std::size_t> rows;
      for (std::size_t r = 0; r < data.size(); ++r) {
        if (leaf_of_row[r] == leaf) rows.push_back(r);
      }
      LeafModel m;
      try {
        m.cox = fit_cox(data.subset(rows), out.roles.survival_vars);
        m.flagged = !m.cox.converged;
      } catch (const Error&) {
        m.flagged = true;
      }
      out.leaf_models[leaf] = std::move(m);
    }
  }
  const auto memberships = assign(out, long_data);
  out.longitudinal = fit_lmm(long_data, memberships, out.roles.fixed_vars, out.roles.random_vars);
  out.has_models = true;
  return out;
}

// ---------------------------------------------------------------------------
// Prediction

SubjectPrediction predict(const JlctTree& tree, const std::vector<std::string>& covariate_names,
                          const SubjectRecords& subject, double horizon,
                          const std::map<std::string, double>* subject_effects) {
  if (!tree.has_models) throw Error(ErrorKind::Usage, "predict: leaf models have not been fitted");
  if (subject.records.empty()) throw Error(ErrorKind::EmptySubject, "predict: subject has no records");
  if (!(horizon > 0.0)) throw Error(ErrorKind::Usage, "predict: horizon must be positive");
  SubjectPrediction out;
  const auto n = subject.records.size();
  std::vector<std::pair<double, double>> jumps;  // (time, hazard increment)
  for (std::size_t k = 0; k < n; ++k) {
    const auto& rec = subject.records[k];
    const int leaf = tree.route(covariate_names, rec.covariates);
    out.leaves.push_back(leaf);
    const auto& fit = tree.leaf_cox(leaf);
    const double mult = hazard_multiplier(fit, covariate_names, rec.covariates);
    const double lo = k == 0 ? -Curve::kUnbounded : rec.time;
    const double hi = k + 1 < n ? subject.records[k + 1].time : horizon;
    const auto& bh = fit.baseline;
    double prev = 0.0;
    for (std::size_t g = 0; g < bh.event_times.size(); ++g) {
      const double tau = bh.event_times[g];
      const double inc = bh.cumulative_hazard[g] - prev;
      prev = bh.cumulative_hazard[g];
      if (tau <= lo) continue;
      if (tau > hi || tau > horizon) break;
      if (inc > 0.0) jumps.emplace_back(tau, inc * mult);
    }
  }
  std::stable_sort(jumps.begin(), jumps.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<double> times, values;
  double cum = 0.0;
  for (const auto& [t, inc] : jumps) {
    cum += inc;
    if (!times.empty() && times.back() == t) {
      values.back() = std::exp(-cum);
    } else {
      times.push_back(t);
      values.push_back(std::exp(-cum));
    }
  }
  out.survival = Curve::step(std::move(times), std::move(values), 1.0, horizon);

  LongDataset single(covariate_names, {subject});
  const auto y = predict_lmm(tree.longitudinal, single, out.leaves, subject_effects);
  out.outcome.assign(y.data(), y.data() + y.size());
  return out;
}

// ---------------------------------------------------------------------------
// Rendering

std::string render_text(const JlctTree& tree) {
  std::ostringstream os;
  std::function<void(int)> visit = [&](int id) {
    const auto& node = tree.nodes.at(id);
    char buf[256];
    std::snprintf(buf, sizeof(buf), "[%d] TS=%.2f rows=%.1f%%", node.id, node.test.ts,
                  100.0 * node.row_fraction);
    os << std::string(static_cast<std::size_t>(2 * node.depth), ' ') << buf;
    if (node.is_leaf()) {
      os << " leaf (" << to_string(node.closure) << ")\n";
      return;
    }
    std::snprintf(buf, sizeof(buf), " split %s <= %.4g (S=%.2f)\n", node.split->variable.c_str(),
                  node.split->threshold, node.split->score);
    os << buf;
    visit(node.children->first);
    visit(node.children->second);
  };
  visit(tree.root_id);
  return os.str();
}

}  // namespace jlct
