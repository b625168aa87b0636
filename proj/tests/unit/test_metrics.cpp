#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "jlct/error.hpp"
#include "jlct/metrics.hpp"
#include "oracles.hpp"

using namespace jlct;

TEST_CASE("ISE of two exponential survival curves against Simpson quadrature") {
  const std::vector<Curve> pred{Curve::smooth([](double t) { return std::exp(-t); })};
  const std::vector<Curve> truth{Curve::smooth([](double t) { return std::exp(-2 * t); })};
  const double expected =
      oracle::simpson([](double t) { return std::pow(std::exp(-t) - std::exp(-2 * t), 2); }, 0, 5) / 5;
  CHECK(ise(pred, truth, 5.0) == doctest::Approx(expected).epsilon(1e-4));
}

TEST_CASE("ISE of step curves is exact") {
  // (1 - 0.5)^2 on [2, 4) out of a horizon of 4.
  const std::vector<Curve> pred{Curve::step({2.0}, {0.5})};
  const std::vector<Curve> truth{Curve(1.0)};
  CHECK(ise(pred, truth, 4.0) == doctest::Approx(0.125).epsilon(1e-12));
  CHECK(ise(truth, truth, 4.0) == 0.0);
  const std::vector<Curve> short_curve{Curve(1.0, 3.0)};
  try {
    ise(short_curve, truth, 4.0);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Coverage);
  }
  // Extremes: 0 vs 1 everywhere.
  const std::vector<Curve> zero{Curve(0.0)};
  CHECK(ise(zero, truth, 4.0) == doctest::Approx(1.0));
}

TEST_CASE("squared-error metrics by hand") {
  CHECK(mse_y(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2, 3}) == 0.0);
  CHECK(mse_y(std::vector<double>{1, 2, 3}, std::vector<double>{2, 2, 1}) == doctest::Approx(5.0 / 3));

  const SlopeTable truth{{1, {1.0, 0.0}}, {2, {0.0, 1.0}}};
  const SlopeTable est{{10, {1.1, 0.0}}, {11, {0.0, 1.0}}};
  // Row 0: leaf 10 vs class 1 -> 0.01; row 1: leaf 11 vs class 2 -> 0.
  CHECK(mse_b(est, std::vector<int>{10, 11}, truth, std::vector<int>{1, 2}) == doctest::Approx(0.005));
  CHECK(mse_b(est, std::vector<int>{10}, truth, std::vector<int>{1}) == doctest::Approx(0.01));
  // Row with leaf 11 but class 1: (1 + 1).
  CHECK(mse_b(est, std::vector<int>{11}, truth, std::vector<int>{1}) == doctest::Approx(2.0));
  CHECK(mse_b(truth, std::vector<int>{1, 2}, truth, std::vector<int>{1, 2}) == 0.0);
}

TEST_CASE("class recovery accuracy") {
  CHECK(acc_g(std::vector<int>{5, 5, 7, 7}, std::vector<int>{1, 1, 2, 2}) == 1.0);
  // Leaf 5 has classes {1,1,2}: majority 1 gives 2/3; leaf 7 has {2}: 1/1.
  CHECK(acc_g(std::vector<int>{5, 5, 5, 7}, std::vector<int>{1, 1, 2, 2}) == doctest::Approx(0.75));
  // A tie inside a leaf goes to the smaller class.
  CHECK(acc_g(std::vector<int>{1, 1}, std::vector<int>{2, 1}) == doctest::Approx(0.5));
  // A single leaf scores the share of its most common class.
  CHECK(acc_g(std::vector<int>{0, 0, 0, 0}, std::vector<int>{1, 2, 3, 3}) == doctest::Approx(0.5));
}

TEST_CASE("Brier score by hand") {
  // Subjects: event at 1, censored at 2, event at 3. Predicted S(1.5) = 0.2, 0.6, 0.9.
  const std::vector<SubjectEvent> events{{1.0, 1}, {2.0, 0}, {3.0, 1}};
  const std::vector<double> s{0.2, 0.6, 0.9};
  const double all = (0.04 + 0.16 + 0.01) / 3;
  CHECK(brier(s, events, 1.5) == doctest::Approx(all));
  // Censored after t stays in.
  CHECK(brier(s, events, 1.5, true) == doctest::Approx(all));
  // At t = 2.5 the censored subject drops out under exclusion.
  CHECK(brier(s, events, 2.5, true) == doctest::Approx((0.04 + 0.01) / 2));
}

TEST_CASE("integrated Brier score") {
  const std::vector<SubjectEvent> events{{1.0, 1}, {2.0, 1}, {4.0, 0}, {3.0, 1}};
  const std::vector<Curve> half(4, Curve(0.5));
  CHECK(std::abs(ibs(half, events) - 0.25) <= 1e-12);

  // Perfect step predictions: indicator curves.
  std::vector<Curve> perfect;
  for (const auto& e : events) perfect.push_back(Curve::step({e.event_time}, {0.0}));
  CHECK(ibs(perfect, events) == doctest::Approx(0.0).scale(1.0));

  // Constant 1 curve: BS(t) = share of subjects with Y <= t; integral by hand over [0, 4].
  const std::vector<Curve> one(4, Curve(1.0));
  const double by_hand = (0.0 * 1 + 0.25 * 1 + 0.5 * 1 + 0.75 * 1) / 4;
  CHECK(ibs(one, events) == doctest::Approx(by_hand).epsilon(1e-9));
}

TEST_CASE("report arithmetic and formatting") {
  MetricReport a, b;
  a.ise_in = 1;
  b.ise_in = 3;
  a.acc_g = 0.5;
  b.acc_g = 1.0;
  a.runtime_seconds = 10;
  const std::vector<MetricReport> v{a, b};
  const auto m = MetricReport::mean(v);
  CHECK(m.ise_in == 2.0);
  CHECK(m.acc_g == 0.75);
  CHECK(MetricReport::csv_header().find("runtime") == std::string::npos);
  CHECK(MetricReport::csv_header(true).find("runtime") != std::string::npos);
  const auto cols = [](const std::string& s) { return std::count(s.begin(), s.end(), ','); };
  CHECK(cols(MetricReport::csv_header()) == cols(m.csv_row()));
  CHECK(cols(MetricReport::csv_header(true)) == cols(m.csv_row(true)));
}

TEST_CASE("fold assignment") {
  SUBCASE("sizes differ by at most one") {
    const auto f = fold_assignment(103, 10, 5);
    std::vector<int> counts(10, 0);
    for (int x : f) counts.at(static_cast<std::size_t>(x))++;
    const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
    CHECK(*hi - *lo <= 1);
  }
  SUBCASE("deterministic in the seed") {
    CHECK(fold_assignment(50, 5, 1) == fold_assignment(50, 5, 1));
    CHECK(fold_assignment(50, 5, 1) != fold_assignment(50, 5, 2));
  }
  SUBCASE("leave-one-out") {
    const auto f = fold_assignment(12, 12, 3);
    CHECK(std::set<int>(f.begin(), f.end()).size() == 12);
  }
}

TEST_CASE("k-fold cross-validation partitions subjects") {
  std::vector<SubjectRecords> subjects;
  for (int i = 0; i < 23; ++i) subjects.push_back({std::to_string(i), {{0.0, 1.0 * i, {0.0}}}, {1.0, 1}});
  const LongDataset data({"x"}, subjects);
  auto evaluate = [](const LongDataset& train, const LongDataset& test) {
    MetricReport r;
    r.ise_in = static_cast<double>(train.n_subjects());
    r.ise_out = static_cast<double>(test.n_subjects());
    double s = 0;
    for (const auto& sub : test.subjects()) s += sub.records[0].outcome;
    r.mse_y_out = s;
    return r;
  };
  const auto one = kfold_cv(data, 5, evaluate, 7, 1);
  const auto four = kfold_cv(data, 5, evaluate, 7, 4);
  REQUIRE(one.folds.size() == 5);
  double total = 0, covered = 0;
  for (std::size_t f = 0; f < 5; ++f) {
    CHECK(one.folds[f].ise_in + one.folds[f].ise_out == 23);
    CHECK(one.folds[f].mse_y_out == four.folds[f].mse_y_out);
    total += one.folds[f].mse_y_out;
    covered += one.folds[f].ise_out;
  }
  CHECK(covered == 23);
  CHECK(total == 22.0 * 23 / 2);
  CHECK(one.mean.ise_out == doctest::Approx(23.0 / 5));
}
