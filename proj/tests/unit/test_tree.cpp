#include <doctest.h>

#include <cmath>

#include "jlct/error.hpp"
#include "jlct/simgen.hpp"
#include "jlct/tree.hpp"

using namespace jlct;

namespace {

/// Hand-built tree: root splits X1 at 0.5; the right child splits X2 at 0.5.
JlctTree two_level_tree() {
  JlctTree t;
  t.roles.split_vars = {"X1", "X2"};
  t.roles.survival_vars = {"X3"};
  auto add = [&](int id, int depth, std::optional<TreeSplit> split, std::optional<std::pair<int, int>> kids) {
    TreeNode n;
    n.id = id;
    n.depth = depth;
    n.split = split;
    n.children = kids;
    n.closure = kids ? Closure::Internal : Closure::BelowThreshold;
    t.nodes[id] = n;
  };
  add(0, 0, TreeSplit{"X1", 0.5, 10.0}, std::make_pair(1, 2));
  add(1, 1, std::nullopt, std::nullopt);
  add(2, 1, TreeSplit{"X2", 0.5, 4.0}, std::make_pair(3, 4));
  add(3, 2, std::nullopt, std::nullopt);
  add(4, 2, std::nullopt, std::nullopt);
  return t;
}

CoxFit constant_hazard_fit(double slope, std::vector<double> times, std::vector<double> cumulative) {
  CoxFit f;
  f.names = {"X3"};
  f.coefficients = Eigen::VectorXd::Constant(1, slope);
  f.vcov = Eigen::MatrixXd::Identity(1, 1);
  f.converged = true;
  f.baseline.event_times = std::move(times);
  f.baseline.cumulative_hazard = std::move(cumulative);
  return f;
}

}  // namespace

TEST_CASE("routing") {
  const auto t = two_level_tree();
  const std::vector<std::string> names{"X1", "X2", "X3"};
  CHECK(t.route(names, std::vector<double>{0.2, 0.9, 0}) == 1);
  CHECK(t.route(names, std::vector<double>{0.7, 0.2, 0}) == 3);
  CHECK(t.route(names, std::vector<double>{0.7, 0.5, 0}) == 3);
  CHECK(t.route(names, std::vector<double>{0.7, 0.51, 0}) == 4);
  CHECK(t.leaves() == std::vector<int>{1, 3, 4});
  try {
    t.route({"X2", "X3"}, std::vector<double>{0.1, 0.1});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::MissingColumn);
  }
}

TEST_CASE("a subject crossing a cut changes leaf between intervals") {
  const auto t = two_level_tree();
  SubjectRecords s{"1", {{0.0, 0, {0.4, 0.1, 0}}, {1.0, 0, {0.6, 0.1, 0}}}, {2.0, 1}};
  const LongDataset data({"X1", "X2", "X3"}, {s});
  CHECK(assign(t, data) == std::vector<int>{1, 3});
  const auto ltrc = to_ltrc(data);
  CHECK(assign(t, ltrc) == std::vector<int>{1, 3});
}

TEST_CASE("pruning collapses the weakest leaf parent") {
  auto t = two_level_tree();
  CHECK(prune_to(t, 6).n_leaves() == 3);
  const auto two = prune_to(t, 2);
  CHECK(two.leaves() == std::vector<int>{1, 2});
  CHECK(two.nodes.at(2).closure == Closure::Pruned);
  const auto one = prune_to(t, 1);
  CHECK(one.leaves() == std::vector<int>{0});

  SUBCASE("equal scores: the larger id goes first") {
    auto u = two_level_tree();
    u.nodes[1].split = TreeSplit{"X2", 0.3, 4.0};
    u.nodes[1].children = std::make_pair(5, 6);
    u.nodes[5] = TreeNode{5, 2, {}, std::nullopt, std::nullopt, 0.0, Closure::BelowThreshold};
    u.nodes[6] = TreeNode{6, 2, {}, std::nullopt, std::nullopt, 0.0, Closure::BelowThreshold};
    const auto p = prune_to(u, 3);
    CHECK(p.leaves() == std::vector<int>{2, 5, 6});
  }
}

TEST_CASE("prediction chains leaf hazards across intervals") {
  auto t = two_level_tree();
  t.has_models = true;
  // Leaf 1: baseline jumps 0.1 at t=1 and 0.2 at t=3; leaf 3: jumps 0.5 at t=2 and 0.4 at t=4.
  t.leaf_models[1] = LeafModel{constant_hazard_fit(0.0, {1, 3}, {0.1, 0.3}), false};
  t.leaf_models[3] = LeafModel{constant_hazard_fit(1.0, {2, 4}, {0.5, 0.9}), false};
  t.leaf_models[4] = LeafModel{constant_hazard_fit(0.0, {2}, {1.0}), false};
  t.root_fit = constant_hazard_fit(0.0, {1}, {1.0});
  t.longitudinal.classes = {1, 3, 4};
  t.longitudinal.fixed_vars = {};
  t.longitudinal.random_vars = {};
  t.longitudinal.column_names = {"(Intercept)", "class[3]", "class[4]"};
  t.longitudinal.coefficients = Eigen::Vector3d(1.0, 2.0, 3.0);

  const std::vector<std::string> names{"X1", "X2", "X3"};
  SUBCASE("never switching leaf") {
    SubjectRecords s{"1", {{0.0, 0, {0.2, 0.2, 1}}, {1.5, 0, {0.3, 0.2, 1}}}, {5.0, 1}};
    const auto p = predict(t, names, s, 5.0);
    CHECK(p.survival(0.5) == 1.0);
    CHECK(p.survival(3.5) == doctest::Approx(std::exp(-0.3)));
    CHECK(p.leaves == std::vector<int>{1, 1});
    CHECK(p.outcome[0] == doctest::Approx(1.0));
  }
  SUBCASE("switching from leaf 1 to leaf 3 at t=2") {
    SubjectRecords s{"1", {{0.0, 0, {0.2, 0.2, 2}}, {2.0, 0, {0.8, 0.2, 2}}}, {5.0, 1}};
    const auto p = predict(t, names, s, 5.0);
    // Leaf 1 on (0, 2]: 0.1 at t=1. Leaf 3 on (2, 5]: 0.4 * e^2 at t=4.
    CHECK(p.survival(1.5) == doctest::Approx(std::exp(-0.1)));
    CHECK(p.survival(4.5) == doctest::Approx(std::exp(-0.1 - 0.4 * std::exp(2.0))));
    CHECK(p.leaves == std::vector<int>{1, 3});
    CHECK(p.outcome[1] == doctest::Approx(3.0));
  }
  SUBCASE("flagged leaves fall back to the root fit") {
    t.leaf_models[1].flagged = true;
    SubjectRecords s{"1", {{0.0, 0, {0.2, 0.2, 0}}}, {5.0, 1}};
    const auto p = predict(t, names, s, 5.0);
    CHECK(p.survival(2.0) == doctest::Approx(std::exp(-1.0)));
  }
}

TEST_CASE("growth on simulated data") {
  SimConfig config;
  config.seed = 3;
  const auto sim = simulate(config);
  const auto ltrc = to_ltrc(sim.data);
  const auto roles = simulation_roles();
  SplitControls controls;
  const auto tree = grow(ltrc, roles, controls);

  SUBCASE("ids follow depth-first creation order") {
    int expected = 0;
    std::function<void(int)> walk = [&](int id) {
      CHECK(id == expected++);
      const auto& n = tree.nodes.at(id);
      if (n.children) {
        walk(n.children->first);
        walk(n.children->second);
      }
    };
    walk(tree.root_id);
    CHECK(static_cast<std::size_t>(expected) == tree.nodes.size());
  }
  SUBCASE("internal nodes cleared the threshold, leaves carry a reason") {
    for (const auto& [id, n] : tree.nodes) {
      if (!n.is_leaf()) {
        CHECK(n.test.ts >= controls.stop_threshold);
      } else {
        CHECK(n.closure != Closure::Internal);
      }
    }
  }
  SUBCASE("all rows reach exactly one leaf") {
    const auto leaf_of = assign(tree, ltrc);
    CHECK(leaf_of.size() == ltrc.size());
    const auto leaves = tree.leaves();
    for (int l : leaf_of) CHECK(std::find(leaves.begin(), leaves.end(), l) != leaves.end());
  }
  SUBCASE("single-node tree leaf model equals the pooled Cox fit") {
    const auto root = prune_to(tree, 1);
    const auto fitted = fit_leaf_models(root, ltrc, sim.data, false);
    const auto pooled = fit_cox(ltrc, roles.survival_vars);
    const auto& leaf = fitted.leaf_cox(root.root_id);
    for (Eigen::Index j = 0; j < pooled.coefficients.size(); ++j) {
      CHECK(leaf.coefficients(j) == doctest::Approx(pooled.coefficients(j)).epsilon(1e-12));
    }
  }
  SUBCASE("result does not depend on the thread count") {
    SplitControls threaded = controls;
    threaded.threads = 3;
    const auto other = grow(ltrc, roles, threaded);
    CHECK(render_text(other) == render_text(tree));
  }
}

TEST_CASE("root with too few events is unfittable") {
  SubjectRecords a{"1", {{0.0, 0.1, {0.1, 0.2, 1, 0.3, 2}}}, {1.0, 1}};
  SubjectRecords b{"2", {{0.0, 0.2, {0.5, 0.2, 0, 0.4, 3}}}, {2.0, 1}};
  SubjectRecords c{"3", {{0.0, 0.3, {0.9, 0.7, 1, 0.1, 1}}}, {3.0, 0}};
  const auto ltrc = to_ltrc(LongDataset(simulation_covariate_names(), {a, b, c}));
  SplitControls controls;
  controls.min_events = 3;
  try {
    grow(ltrc, simulation_roles(), controls);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Unfittable);
  }
}
