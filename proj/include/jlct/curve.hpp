#pragma once

#include <functional>
#include <limits>
#include <vector>

namespace jlct {

/// A survival-type curve on [0, support_end]: either a right-continuous step
/// function or a continuous function given by a callable. Knots/jumps are
/// exposed so integrators can place grid points on them.
class Curve {
 public:
  static constexpr double kUnbounded = std::numeric_limits<double>::infinity();

  /// Constant curve.
  explicit Curve(double level = 1.0, double support_end = kUnbounded);

  /// value(t) = values[k] for the largest k with times[k] <= t, `initial`
  /// before times[0]. `times` must be strictly increasing.
  static Curve step(std::vector<double> times, std::vector<double> values,
                    double initial = 1.0, double support_end = kUnbounded);

  static Curve smooth(std::function<double(double)> fn,
                      std::vector<double> knots = {},
                      double support_end = kUnbounded);

  double operator()(double t) const;
  double left_limit(double t) const;

  bool is_step() const { return !fn_; }
  double support_end() const { return support_end_; }
  /// Jump times (step curves) or knots (smooth curves).
  const std::vector<double>& breakpoints() const { return times_; }
  const std::vector<double>& values() const { return values_; }
  double initial() const { return initial_; }

 private:
  std::vector<double> times_;
  std::vector<double> values_;
  double initial_ = 1.0;
  std::function<double(double)> fn_;
  double support_end_ = kUnbounded;
};

}  // namespace jlct
