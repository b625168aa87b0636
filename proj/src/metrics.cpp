#include "jlct/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <sstream>

#include "jlct/error.hpp"
#include "jlct/parallel.hpp"

namespace jlct {

namespace {

/// Sorted grid on [0, end]: the given breakpoints inside (0, end) plus a
/// uniform auxiliary grid.
std::vector<double> make_grid(std::vector<double> points, double end) {
  for (int k = 0; k <= kAuxGridPoints; ++k) points.push_back(end * k / kAuxGridPoints);
  std::erase_if(points, [end](double t) { return !(t >= 0.0 && t <= end); });
  std::sort(points.begin(), points.end());
  points.erase(std::unique(points.begin(), points.end()), points.end());
  return points;
}

/// Trapezoid rule using f at the left end and f's left limit at the right
/// end of each cell, exact for right-continuous step integrands.
template <class F, class FLeft>
double integrate(const std::vector<double>& grid, F f, FLeft f_left) {
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
    const double a = grid[k], b = grid[k + 1];
    total += 0.5 * (f(a) + f_left(b)) * (b - a);
  }
  return total;
}

void check_cover(const Curve& c, double horizon) {
  if (c.support_end() < horizon) {
    throw Error(ErrorKind::Coverage, "curve ends at " + format_double(c.support_end()) +
                                         " before horizon " + format_double(horizon));
  }
}

}  // namespace

double ise(std::span<const Curve> predicted, std::span<const Curve> truth, double horizon) {
  if (predicted.size() != truth.size()) throw Error(ErrorKind::Shape, "ise: curve counts differ");
  if (predicted.empty()) throw Error(ErrorKind::Shape, "ise: no curves");
  if (!(horizon > 0.0)) throw Error(ErrorKind::Usage, "ise: horizon must be positive");
  double total = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const Curve& p = predicted[i];
    const Curve& s = truth[i];
    check_cover(p, horizon);
    check_cover(s, horizon);
    std::vector<double> pts = p.breakpoints();
    pts.insert(pts.end(), s.breakpoints().begin(), s.breakpoints().end());
    const auto grid = make_grid(std::move(pts), horizon);
    const double area = integrate(
        grid, [&](double t) { const double d = p(t) - s(t); return d * d; },
        [&](double t) { const double d = p.left_limit(t) - s.left_limit(t); return d * d; });
    total += area / horizon;
  }
  return total / static_cast<double>(predicted.size());
}

double mse_y(std::span<const double> predicted, std::span<const double> actual) {
  if (predicted.size() != actual.size()) throw Error(ErrorKind::Shape, "mse_y: lengths differ");
  if (predicted.empty()) throw Error(ErrorKind::Shape, "mse_y: no rows");
  double total = 0.0;
  for (std::size_t r = 0; r < predicted.size(); ++r) {
    const double d = predicted[r] - actual[r];
    total += d * d;
  }
  return total / static_cast<double>(predicted.size());
}

double mse_b(const SlopeTable& estimated, std::span<const int> assigned, const SlopeTable& truth,
             std::span<const int> true_class) {
  if (assigned.size() != true_class.size()) throw Error(ErrorKind::Shape, "mse_b: lengths differ");
  if (assigned.empty()) throw Error(ErrorKind::Shape, "mse_b: no rows");
  double total = 0.0;
  for (std::size_t r = 0; r < assigned.size(); ++r) {
    const auto e = estimated.find(assigned[r]);
    const auto t = truth.find(true_class[r]);
    if (e == estimated.end()) {
      throw Error(ErrorKind::UnknownClass, "mse_b: no estimate for class " + std::to_string(assigned[r]));
    }
    if (t == truth.end()) {
      throw Error(ErrorKind::UnknownClass, "mse_b: no true slopes for class " + std::to_string(true_class[r]));
    }
    if (e->second.size() != t->second.size()) throw Error(ErrorKind::Shape, "mse_b: slope dimensions differ");
    for (std::size_t j = 0; j < e->second.size(); ++j) {
      const double d = e->second[j] - t->second[j];
      total += d * d;
    }
  }
  return total / static_cast<double>(assigned.size());
}

double acc_g(std::span<const int> leaves, std::span<const int> true_class) {
  if (leaves.size() != true_class.size()) throw Error(ErrorKind::Shape, "acc_g: lengths differ");
  if (leaves.empty()) throw Error(ErrorKind::Shape, "acc_g: no rows");
  std::map<int, std::map<int, std::size_t>> counts;
  for (std::size_t r = 0; r < leaves.size(); ++r) ++counts[leaves[r]][true_class[r]];
  std::size_t hits = 0;
  for (const auto& [leaf, by_class] : counts) {
    std::size_t best = 0;
    for (const auto& [cls, c] : by_class) best = std::max(best, c);  // ascending class order
    hits += best;
  }
  return static_cast<double>(hits) / static_cast<double>(leaves.size());
}

double brier(std::span<const double> predicted_at_t, std::span<const SubjectEvent> events, double t,
             bool exclude_censored) {
  if (predicted_at_t.size() != events.size()) throw Error(ErrorKind::Shape, "brier: lengths differ");
  double total = 0.0;
  std::size_t used = 0;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const bool alive = events[i].event_time > t;
    if (exclude_censored && !alive && events[i].status == 0) continue;
    const double d = (alive ? 1.0 : 0.0) - predicted_at_t[i];
    total += d * d;
    ++used;
  }
  return used == 0 ? 0.0 : total / static_cast<double>(used);
}

double ibs(std::span<const Curve> predicted, std::span<const SubjectEvent> events, bool exclude_censored) {
  if (predicted.size() != events.size()) throw Error(ErrorKind::Shape, "ibs: lengths differ");
  if (events.empty()) throw Error(ErrorKind::Shape, "ibs: no subjects");
  double end = 0.0;
  std::vector<double> pts;
  for (const auto& e : events) {
    end = std::max(end, e.event_time);
    pts.push_back(e.event_time);
  }
  if (!(end > 0.0)) throw Error(ErrorKind::Usage, "ibs: all observed times are zero");
  for (const auto& c : predicted) {
    check_cover(c, end);
    pts.insert(pts.end(), c.breakpoints().begin(), c.breakpoints().end());
  }
  const auto grid = make_grid(std::move(pts), end);
  std::vector<double> at(predicted.size());
  auto bs = [&](double t) {
    for (std::size_t i = 0; i < predicted.size(); ++i) at[i] = predicted[i](t);
    return brier(at, events, t, exclude_censored);
  };
  // Left limit in t: I(Y > s) -> I(Y >= t); the censored exclusion Y <= s -> Y < t.
  auto bs_left = [&](double t) {
    double total = 0.0;
    std::size_t used = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
      const bool alive = events[i].event_time >= t;
      if (exclude_censored && !alive && events[i].status == 0) continue;
      const double d = (alive ? 1.0 : 0.0) - predicted[i].left_limit(t);
      total += d * d;
      ++used;
    }
    return used == 0 ? 0.0 : total / static_cast<double>(used);
  };
  return integrate(grid, bs, bs_left) / end;
}

// ---------------------------------------------------------------------------
// Reports

namespace {

struct Field {
  const char* key;
  double MetricReport::*member;
};

constexpr Field kFields[] = {
    {"ise_in", &MetricReport::ise_in},       {"ise_out", &MetricReport::ise_out},
    {"mse_y_in", &MetricReport::mse_y_in},   {"mse_y_out", &MetricReport::mse_y_out},
    {"mse_b", &MetricReport::mse_b},         {"acc_g", &MetricReport::acc_g},
    {"ibs", &MetricReport::ibs},             {"n_terminal", &MetricReport::n_terminal},
    {"runtime_seconds", &MetricReport::runtime_seconds},
};

bool skip(const Field& f, bool with_runtime) {
  return !with_runtime && f.member == &MetricReport::runtime_seconds;
}

}  // namespace

void MetricReport::write_key_value(std::ostream& out, bool with_runtime) const {
  for (const auto& f : kFields) {
    if (!skip(f, with_runtime)) out << f.key << '=' << format_double(this->*f.member) << '\n';
  }
}

std::string MetricReport::csv_header(bool with_runtime) {
  std::string s;
  for (const auto& f : kFields) {
    if (skip(f, with_runtime)) continue;
    if (!s.empty()) s += ',';
    s += f.key;
  }
  return s;
}

std::string MetricReport::csv_row(bool with_runtime) const {
  std::string s;
  bool first = true;
  for (const auto& f : kFields) {
    if (skip(f, with_runtime)) continue;
    if (!first) s += ',';
    first = false;
    s += format_double(this->*f.member);
  }
  return s;
}

MetricReport MetricReport::mean(std::span<const MetricReport> reports) {
  MetricReport m;
  if (reports.empty()) return m;
  for (const auto& f : kFields) {
    double s = 0.0;
    for (const auto& r : reports) s += r.*f.member;
    m.*f.member = s / static_cast<double>(reports.size());
  }
  return m;
}

// ---------------------------------------------------------------------------
// Cross-validation

std::vector<int> fold_assignment(std::size_t n_subjects, int k, std::uint64_t seed) {
  if (k < 2) throw Error(ErrorKind::Usage, "k-fold cross-validation needs k >= 2");
  if (n_subjects < static_cast<std::size_t>(k)) {
    throw Error(ErrorKind::Usage, "fewer subjects (" + std::to_string(n_subjects) + ") than folds (" +
                                      std::to_string(k) + ")");
  }
  std::vector<std::size_t> order(n_subjects);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  // Fisher-Yates with explicit index draws keeps the permutation portable.
  for (std::size_t i = n_subjects; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(order[i - 1], order[j]);
  }
  std::vector<int> fold(n_subjects);
  for (std::size_t pos = 0; pos < n_subjects; ++pos) fold[order[pos]] = static_cast<int>(pos % static_cast<std::size_t>(k));
  return fold;
}

CvResult kfold_cv(const LongDataset& data, int k, const FoldEvaluator& evaluate, std::uint64_t seed,
                  int threads) {
  const auto fold = fold_assignment(data.n_subjects(), k, seed);
  CvResult out;
  out.folds.resize(static_cast<std::size_t>(k));
  parallel_for(static_cast<std::size_t>(k), threads, [&](std::size_t f) {
    std::vector<std::size_t> train, test;
    for (std::size_t i = 0; i < fold.size(); ++i) {
      (static_cast<std::size_t>(fold[i]) == f ? test : train).push_back(i);
    }
    out.folds[f] = evaluate(data.select_subjects(train), data.select_subjects(test));
  });
  out.mean = MetricReport::mean(out.folds);
  return out;
}

}  // namespace jlct
