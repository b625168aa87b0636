#include <doctest.h>

#include <random>

#include "jlct/error.hpp"
#include "jlct/simgen.hpp"
#include "jlct/splitting.hpp"
#include "oracles.hpp"

using namespace jlct;

namespace {

/// Single-interval subjects with hazard exp(effect * y); z is pure noise.
LtrcDataset hazard_on_y(std::size_t n, double effect, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  LtrcDataset d;
  d.covariate_names = {"z", "s1", "s2"};
  d.covariates.resize(static_cast<Eigen::Index>(n), 3);
  for (std::size_t i = 0; i < n; ++i) {
    const double y = normal(rng);
    const double t = -std::log(unif(rng)) / std::exp(effect * y);
    d.subject_ids.push_back(std::to_string(i));
    d.subject.push_back(i);
    d.record.push_back(0);
    d.start.push_back(0.0);
    d.stop.push_back(t);
    d.status.push_back(1);
    d.outcome.push_back(y);
    const auto r = static_cast<Eigen::Index>(i);
    d.covariates(r, 0) = normal(rng);
    d.covariates(r, 1) = unif(rng);
    d.covariates(r, 2) = d.covariates(r, 1);
  }
  return d;
}

}  // namespace

TEST_CASE("thresholds are midpoints of distinct values") {
  CHECK(enumerate_thresholds(std::vector<double>{0, 1, 1, 0}) == std::vector<double>{0.5});
  CHECK(enumerate_thresholds(std::vector<double>{5, 3, 1, 2, 4}) == std::vector<double>{1.5, 2.5, 3.5, 4.5});
  CHECK(enumerate_thresholds(std::vector<double>{2, 2, 2}).empty());
}

TEST_CASE("node test statistic") {
  SplitControls controls;
  SUBCASE("strong outcome-hazard association gives a large statistic") {
    const auto d = hazard_on_y(50, 2.0, 1);
    const auto t = node_test(d, {"z"}, controls);
    CHECK(t.valid);
    CHECK(t.ts > 3.84);
  }
  SUBCASE("without survival covariates the statistic is the profile likelihood ratio of y") {
    const auto d = hazard_on_y(40, 1.0, 3);
    const auto t = node_test(d, {}, controls);
    std::vector<oracle::Row> rows;
    for (std::size_t i = 0; i < d.size(); ++i) rows.push_back({d.start[i], d.stop[i], d.status[i], d.outcome[i]});
    auto ll = [&](double b) { return oracle::breslow_loglik(rows, b); };
    const double b = oracle::grid_argmax(ll, -10, 10, 1e-4);
    CHECK(t.ts == doctest::Approx(2 * (ll(b) - ll(0))).epsilon(1e-6));
    CHECK(t.full_fit.coefficients(0) == doctest::Approx(b).epsilon(1e-3));
  }
  SUBCASE("too few events") {
    auto d = hazard_on_y(30, 0.0, 4);
    std::fill(d.status.begin(), d.status.end(), 0);
    d.status[0] = d.status[1] = 1;
    controls.min_events = 3;
    const auto t = node_test(d, {"z"}, controls);
    CHECK_FALSE(t.valid);
    CHECK(t.reason == TestReason::TooFewEvents);
  }
  SUBCASE("statistic is never negative") {
    for (std::uint64_t s = 10; s < 20; ++s) CHECK(node_test(hazard_on_y(40, 0.0, s), {"z"}, controls).ts >= 0.0);
  }
}

TEST_CASE("best split screening and ties") {
  SplitControls controls;
  controls.min_node_rows = 10;
  auto d = hazard_on_y(120, 1.5, 7);
  // Make the association live only where s1 > 0.5 so a split on s1 helps.
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d.covariates(static_cast<Eigen::Index>(i), 1) <= 0.5) d.outcome[i] = 0.01 * static_cast<double>(i % 7);
  }
  VariableRoles roles;
  roles.survival_vars = {"z"};
  roles.split_vars = {"s1", "s2"};
  const auto root = node_test(d, roles.survival_vars, controls);
  REQUIRE(root.ts > controls.stop_threshold);
  SUBCASE("duplicated column: the earlier variable wins") {
    const auto best = best_split(d, roles, controls, root);
    REQUIRE(best.has_value());
    CHECK(best->variable == "s1");
    CHECK(best->left_rows.size() + best->right_rows.size() == d.size());
    CHECK(best->left_rows.size() >= controls.min_node_rows);
    CHECK(best->right_rows.size() >= controls.min_node_rows);
  }
  SUBCASE("no candidate survives the event screen") {
    controls.min_events = 100;
    CHECK_FALSE(best_split(d, roles, controls, root).has_value());
  }
  SUBCASE("result does not depend on the thread count") {
    const auto one = best_split(d, roles, controls, root);
    controls.threads = 4;
    const auto four = best_split(d, roles, controls, root);
    REQUIRE(one.has_value());
    REQUIRE(four.has_value());
    CHECK(one->variable == four->variable);
    CHECK(one->threshold == four->threshold);
    CHECK(one->score == four->score);
  }
}

TEST_CASE("monotone transform of the split variable keeps the partition") {
  SplitControls controls;
  controls.min_node_rows = 10;
  auto d = hazard_on_y(100, 1.5, 11);
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d.covariates(static_cast<Eigen::Index>(i), 1) <= 0.4) d.outcome[i] = 0.0;
  }
  VariableRoles roles;
  roles.survival_vars = {"z"};
  roles.split_vars = {"s1"};
  const auto root = node_test(d, roles.survival_vars, controls);
  const auto a = best_split(d, roles, controls, root);
  auto e = d;
  for (Eigen::Index r = 0; r < e.covariates.rows(); ++r) e.covariates(r, 1) = std::exp(3 * e.covariates(r, 1));
  const auto b = best_split(e, roles, controls, root);
  REQUIRE(a.has_value());
  REQUIRE(b.has_value());
  CHECK(a->left_rows == b->left_rows);
  CHECK(a->score == doctest::Approx(b->score));
}

TEST_CASE("first split on simulated tree data lands near the generating cut") {
  int near = 0;
  const int seeds = 5;
  for (int s = 1; s <= seeds; ++s) {
    SimConfig config;
    config.seed = static_cast<std::uint64_t>(s);
    const auto sim = simulate(config);
    const auto ltrc = to_ltrc(sim.data);
    const auto roles = simulation_roles();
    SplitControls controls;
    const auto root = node_test(ltrc, roles.survival_vars, controls);
    const auto best = best_split(ltrc, roles, controls, root);
    REQUIRE(best.has_value());
    if ((best->variable == "X1" || best->variable == "X2") && best->threshold >= 0.45 && best->threshold <= 0.55) ++near;
  }
  CHECK(near >= seeds - 1);
}
