#include "jlct/curve.hpp"

#include <algorithm>

#include "jlct/error.hpp"

namespace jlct {

Curve::Curve(double level, double support_end) : initial_(level), support_end_(support_end) {}

Curve Curve::step(std::vector<double> times, std::vector<double> values, double initial,
                  double support_end) {
  if (times.size() != values.size()) {
    throw Error(ErrorKind::Shape, "step curve: times and values differ in length");
  }
  for (std::size_t k = 1; k < times.size(); ++k) {
    if (!(times[k] > times[k - 1])) {
      throw Error(ErrorKind::Ordering, "step curve: times must be strictly increasing");
    }
  }
  Curve c(initial, support_end);
  c.times_ = std::move(times);
  c.values_ = std::move(values);
  return c;
}

Curve Curve::smooth(std::function<double(double)> fn, std::vector<double> knots,
                    double support_end) {
  Curve c(1.0, support_end);
  std::sort(knots.begin(), knots.end());
  knots.erase(std::unique(knots.begin(), knots.end()), knots.end());
  c.times_ = std::move(knots);
  c.fn_ = std::move(fn);
  return c;
}

double Curve::operator()(double t) const {
  if (fn_) return fn_(t);
  auto it = std::upper_bound(times_.begin(), times_.end(), t);
  if (it == times_.begin()) return initial_;
  return values_[static_cast<std::size_t>(it - times_.begin()) - 1];
}

double Curve::left_limit(double t) const {
  if (fn_) return fn_(t);
  auto it = std::lower_bound(times_.begin(), times_.end(), t);
  if (it == times_.begin()) return initial_;
  return values_[static_cast<std::size_t>(it - times_.begin()) - 1];
}

}  // namespace jlct
