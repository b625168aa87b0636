#pragma once

// Independent reference computations used by the tests. Deliberately naive:
// nothing here shares code with the library.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace oracle {

struct Row {
  double start, stop;
  int status;
  double x;
};

/// Breslow partial log-likelihood by brute force over distinct event times.
inline double breslow_loglik(const std::vector<Row>& rows, double b) {
  std::vector<double> times;
  for (const auto& r : rows) {
    if (r.status == 1) times.push_back(r.stop);
  }
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  double ll = 0.0;
  for (double t : times) {
    double risk = 0.0;
    int d = 0;
    for (const auto& r : rows) {
      if (r.start < t && t <= r.stop) risk += std::exp(b * r.x);
      if (r.status == 1 && r.stop == t) {
        ll += b * r.x;
        ++d;
      }
    }
    ll -= d * std::log(risk);
  }
  return ll;
}

/// Maximizer of f over a uniform grid on [lo, hi].
inline double grid_argmax(const std::function<double(double)>& f, double lo, double hi, double step) {
  double best_x = lo, best = f(lo);
  const long n = std::lround((hi - lo) / step);
  for (long k = 1; k <= n; ++k) {
    const double x = lo + static_cast<double>(k) * step;
    const double v = f(x);
    if (v > best) {
      best = v;
      best_x = x;
    }
  }
  return best_x;
}

/// Central finite difference.
inline double derivative(const std::function<double(double)>& f, double x, double h = 1e-5) {
  return (f(x + h) - f(x - h)) / (2 * h);
}

/// Composite Simpson rule with n (even) panels.
inline double simpson(const std::function<double(double)>& f, double a, double b, int n = 20000) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int k = 1; k < n; ++k) s += (k % 2 ? 4.0 : 2.0) * f(a + k * h);
  return s * h / 3.0;
}

}  // namespace oracle
