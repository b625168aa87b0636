#include "jlct/simgen.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <tuple>

#include "jlct/error.hpp"

namespace jlct {

const char* to_string(Structure s) {
  switch (s) {
    case Structure::Tree: return "tree";
    case Structure::Linear: return "linear";
    case Structure::Nonlinear: return "nonlinear";
    case Structure::Asymmetric: return "asymmetric";
    case Structure::Null: return "null";
  }
  return "unknown";
}

const char* to_string(HazardFamily h) {
  switch (h) {
    case HazardFamily::Exponential: return "exponential";
    case HazardFamily::WeibullD: return "weibull-d";
    case HazardFamily::WeibullI: return "weibull-i";
  }
  return "unknown";
}

const char* to_string(Censoring c) {
  switch (c) {
    case Censoring::None: return "none";
    case Censoring::Light: return "light";
    case Censoring::Heavy: return "heavy";
  }
  return "unknown";
}

Structure parse_structure(const std::string& s) {
  for (auto v : {Structure::Tree, Structure::Linear, Structure::Nonlinear, Structure::Asymmetric,
                 Structure::Null}) {
    if (s == to_string(v)) return v;
  }
  throw Error(ErrorKind::Usage, "unknown structure '" + s + "'");
}

HazardFamily parse_hazard(const std::string& s) {
  for (auto v : {HazardFamily::Exponential, HazardFamily::WeibullD, HazardFamily::WeibullI}) {
    if (s == to_string(v)) return v;
  }
  throw Error(ErrorKind::Usage, "unknown hazard '" + s + "'");
}

Censoring parse_censoring(const std::string& s) {
  for (auto v : {Censoring::None, Censoring::Light, Censoring::Heavy}) {
    if (s == to_string(v)) return v;
  }
  throw Error(ErrorKind::Usage, "unknown censoring level '" + s + "'");
}

// ---------------------------------------------------------------------------
// Baseline hazards

BaselineSpec BaselineSpec::of(HazardFamily family) {
  BaselineSpec b;
  b.family = family;
  switch (family) {
    case HazardFamily::Exponential: b.rate = 0.1; break;
    case HazardFamily::WeibullD: b.shape = 0.9; b.scale = 1.0; break;
    case HazardFamily::WeibullI: b.shape = 3.0; b.scale = 2.0; break;
  }
  return b;
}

double BaselineSpec::cumulative(double t) const {
  if (t <= 0.0) return 0.0;
  if (family == HazardFamily::Exponential) return rate * t;
  return std::pow(t / scale, shape);
}

double BaselineSpec::inverse(double h) const {
  if (h <= 0.0) return 0.0;
  if (family == HazardFamily::Exponential) return h / rate;
  return scale * std::pow(h, 1.0 / shape);
}

void SimConfig::validate() const {
  if (n_subjects < 1) throw Error(ErrorKind::Usage, "simulation needs at least one subject");
  if (!(p0 >= 0.25 && p0 <= 1.0)) throw Error(ErrorKind::Usage, "p0 must lie in [0.25, 1]");
  if (sigma_v < 0.0 || sigma_e < 0.0) throw Error(ErrorKind::Usage, "noise scales must be >= 0");
}

std::mt19937_64 substream(std::uint64_t seed, Stream stream, std::uint64_t subject) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(subject),
                    static_cast<std::uint32_t>(subject >> 32)};
  return std::mt19937_64(seq);
}

VariableRoles simulation_roles() {
  VariableRoles roles;
  const auto all = simulation_covariate_names();
  roles.split_vars = all;
  roles.survival_vars = {"X3", "X4", "X5"};
  roles.fixed_vars = all;
  roles.random_vars = all;
  return roles;
}

std::vector<std::string> simulation_covariate_names() { return {"X1", "X2", "X3", "X4", "X5"}; }

// ---------------------------------------------------------------------------
// Latent structures

namespace {

constexpr double kTreeW[4][2] = {{-1, -1}, {-1, 1}, {1, -1}, {1, 1}};
constexpr double kLinearW[4][2] = {{0.8, -0.6}, {0.9, 0.5}, {-0.8, 0.6}, {0.5, 0.9}};

constexpr double kSlopes[3][4][3] = {
    // Exponential
    {{0, 0, 0}, {0.56, 0.56, 0.09}, {0.92, 0.92, 0.15}, {1.46, 1.46, 0.24}},
    // Weibull-D
    {{-1.17, -1.17, -0.19}, {-0.66, -0.66, -0.11}, {-0.55, -0.55, -0.09}, {0, 0, 0}},
    // Weibull-I
    {{-3.22, -3.22, -0.54}, {-2.26, -2.26, -0.38}, {-1.53, -1.53, -0.26}, {0, 0, 0}},
};

constexpr double kIntercepts[4] = {0.0, 1.0, 1.0, 2.0};

std::array<double, 4> scores(Structure structure, double x1, double x2) {
  const auto& w = structure == Structure::Linear ? kLinearW : kTreeW;
  std::array<double, 4> f{};
  for (int g = 0; g < 4; ++g) f[static_cast<std::size_t>(g)] = w[g][0] * (2 * x1 - 1) + w[g][1] * (2 * x2 - 1);
  return f;
}

/// Pr(g = majority | x, C) under the softmax model.
double majority_probability(const std::array<double, 4>& f, double c) {
  const double top = *std::max_element(f.begin(), f.end());
  double denom = 0.0;
  for (double v : f) denom += std::exp(c * (v - top));
  return 1.0 / denom;
}

}  // namespace

int majority_class(Structure structure, double x1, double x2) {
  switch (structure) {
    case Structure::Tree:
    case Structure::Linear: {
      const auto f = scores(structure, x1, x2);
      return static_cast<int>(std::max_element(f.begin(), f.end()) - f.begin()) + 1;
    }
    case Structure::Nonlinear: {
      constexpr double r2 = 0.75 * 0.75;
      const bool lower = x1 * x1 + x2 * x2 <= r2;
      const bool upper = x1 * x1 + (1 - x2) * (1 - x2) <= r2;
      if (lower && !upper) return 1;
      if (upper && !lower) return 2;
      if (!lower && !upper) return 3;
      return 4;
    }
    case Structure::Asymmetric:
      if (x1 > 0.75) return 1;
      if (x2 <= 0.33) return 2;
      if (x2 <= 0.67) return 3;
      return 4;
    case Structure::Null:
      return 1;
  }
  return 1;
}

double calibrate_concentration(Structure structure, double p0) {
  if (structure != Structure::Tree && structure != Structure::Linear) {
    throw Error(ErrorKind::Calibration, "concentration calibration applies to tree/linear structures");
  }
  if (p0 >= 1.0) return Curve::kUnbounded;
  if (p0 <= 0.25) {
    if (p0 < 0.25) throw Error(ErrorKind::Calibration, "p0 below 0.25 cannot be reached");
    return 0.0;
  }
  static std::mutex mutex;
  static std::map<std::pair<int, double>, double> cache;
  const auto key = std::make_pair(static_cast<int>(structure), p0);
  {
    std::lock_guard<std::mutex> lock(mutex);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }
  constexpr std::size_t kDraws = 100000;
  auto rng = substream(0x6a6c6374ULL, Stream::Classes, 0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<std::array<double, 4>> f(kDraws);
  for (auto& v : f) {
    const double x1 = unif(rng);
    const double x2 = unif(rng);
    v = scores(structure, x1, x2);
  }
  auto mean_prob = [&](double c) {
    double s = 0.0;
    for (const auto& v : f) s += majority_probability(v, c);
    return s / static_cast<double>(kDraws);
  };
  double lo = 0.0, hi = 1.0;
  while (mean_prob(hi) < p0) {
    hi *= 2.0;
    if (hi > 1e6) throw Error(ErrorKind::Calibration, "concentration root not bracketed");
  }
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    (mean_prob(mid) < p0 ? lo : hi) = mid;
  }
  const double c = 0.5 * (lo + hi);
  std::lock_guard<std::mutex> lock(mutex);
  cache[key] = c;
  return c;
}

std::array<double, 3> true_slopes(Structure structure, HazardFamily hazard, int cls) {
  const int row = structure == Structure::Null ? 4 : cls;
  if (row < 1 || row > 4) throw Error(ErrorKind::UnknownClass, "classes are 1..4");
  const auto& s = kSlopes[static_cast<int>(hazard)][row - 1];
  return {s[0], s[1], s[2]};
}

double class_intercept(Structure structure, int cls) {
  if (structure == Structure::Null) return 0.0;
  if (cls < 1 || cls > 4) throw Error(ErrorKind::UnknownClass, "classes are 1..4");
  return kIntercepts[cls - 1];
}

// ---------------------------------------------------------------------------
// Generators

CovariateVector apply_change(const CovariateVector& pre, double d1, double d2, double x3_new, double d4,
                             int d5) {
  auto clamp01 = [](double v) { return std::clamp(v, 0.0, 1.0); };
  return {clamp01(pre[0] + d1), clamp01(pre[1] + d2), x3_new, clamp01(pre[3] + d4),
          std::clamp(pre[4] + d5, 1.0, 5.0)};
}

std::vector<SubjectCovariates> gen_covariates(const SimConfig& config) {
  std::vector<SubjectCovariates> out(config.n_subjects);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::uniform_int_distribution<int> bit(0, 1), level(1, 5), shift(-1, 1);
  std::uniform_real_distribution<double> perturb(-0.3, 0.3), change(1.0, 3.0);
  for (std::size_t i = 0; i < config.n_subjects; ++i) {
    auto rng = substream(config.seed, Stream::Covariates, i);
    auto& s = out[i];
    s.pre = {unif(rng), unif(rng), static_cast<double>(bit(rng)), unif(rng),
             static_cast<double>(level(rng))};
    if (config.time_varying) {
      s.change_point = change(rng);
      const double d1 = perturb(rng), d2 = perturb(rng);
      const double x3 = static_cast<double>(bit(rng));
      const double d4 = perturb(rng);
      const int d5 = shift(rng);
      s.post = apply_change(s.pre, d1, d2, x3, d4, d5);
    } else {
      s.post = s.pre;
    }
  }
  return out;
}

TrueLatent gen_latent(const SimConfig& config, const std::vector<SubjectCovariates>& covariates) {
  TrueLatent latent;
  const bool softmax = config.structure == Structure::Tree || config.structure == Structure::Linear;
  latent.concentration = softmax ? calibrate_concentration(config.structure, config.p0) : 0.0;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  auto draw = [&](std::mt19937_64& rng, double x1, double x2, int& majority) {
    majority = majority_class(config.structure, x1, x2);
    const double u = unif(rng);
    if (config.structure == Structure::Null) return 1;
    std::array<double, 4> prob{};
    if (softmax) {
      if (std::isinf(latent.concentration)) return majority;
      const auto f = scores(config.structure, x1, x2);
      const double top = *std::max_element(f.begin(), f.end());
      double denom = 0.0;
      for (std::size_t g = 0; g < 4; ++g) {
        prob[g] = std::exp(latent.concentration * (f[g] - top));
        denom += prob[g];
      }
      for (auto& p : prob) p /= denom;
    } else {
      for (std::size_t g = 0; g < 4; ++g) {
        prob[g] = static_cast<int>(g) + 1 == majority ? config.p0 : (1.0 - config.p0) / 3.0;
      }
    }
    double acc = 0.0;
    for (std::size_t g = 0; g < 4; ++g) {
      acc += prob[g];
      if (u < acc) return static_cast<int>(g) + 1;
    }
    return 4;
  };
  latent.subjects.resize(covariates.size());
  for (std::size_t i = 0; i < covariates.size(); ++i) {
    auto rng = substream(config.seed, Stream::Classes, i);
    const auto& c = covariates[i];
    auto& s = latent.subjects[i];
    s.class_pre = draw(rng, c.pre[0], c.pre[1], s.majority_pre);
    if (config.time_varying) {
      s.class_post = draw(rng, c.post[0], c.post[1], s.majority_post);
    } else {
      s.class_post = s.class_pre;
      s.majority_post = s.majority_pre;
    }
  }
  return latent;
}

namespace {

double multiplier(const SimConfig& config, int cls, const CovariateVector& x) {
  const auto b = true_slopes(config.structure, config.hazard, cls);
  return std::exp(b[0] * x[2] + b[1] * x[3] + b[2] * x[4]);
}

/// Cumulative hazard of a two-piece multiplier path.
double cumulative_hazard(const BaselineSpec& base, double change_point, double m_pre, double m_post,
                         double t) {
  if (t <= change_point) return m_pre * base.cumulative(t);
  return m_pre * base.cumulative(change_point) +
         m_post * (base.cumulative(t) - base.cumulative(change_point));
}

double invert_cumulative(const BaselineSpec& base, double change_point, double m_pre, double m_post,
                         double h) {
  const double h_change = std::isinf(change_point) ? Curve::kUnbounded
                                                   : m_pre * base.cumulative(change_point);
  if (h <= h_change) return base.inverse(h / m_pre);
  return base.inverse(base.cumulative(change_point) + (h - h_change) / m_post);
}

/// Latent (truncation, event time) pairs, drawn conditionally on survival
/// past the truncation time.
void draw_events(const SimConfig& config, const TrueLatent& latent,
                 const std::vector<SubjectCovariates>& covariates, std::vector<SubjectSurvival>& out) {
  const auto base = BaselineSpec::of(config.hazard);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::exponential_distribution<double> expo(1.0);
  out.resize(covariates.size());
  for (std::size_t i = 0; i < covariates.size(); ++i) {
    auto rng = substream(config.seed, Stream::Survival, i);
    const auto& c = covariates[i];
    auto& s = out[i];
    s.multiplier_pre = multiplier(config, latent.subjects[i].class_pre, c.pre);
    s.multiplier_post = multiplier(config, latent.subjects[i].class_post, c.post);
    s.truncation = unif(rng);
    const double h_entry =
        cumulative_hazard(base, c.change_point, s.multiplier_pre, s.multiplier_post, s.truncation);
    s.event_time = invert_cumulative(base, c.change_point, s.multiplier_pre, s.multiplier_post,
                                     h_entry + expo(rng));
    if (!(s.event_time > s.truncation)) s.event_time = std::nextafter(s.truncation, Curve::kUnbounded);
  }
}

double censoring_target(Censoring c) {
  switch (c) {
    case Censoring::None: return 0.0;
    case Censoring::Light: return 0.2;
    case Censoring::Heavy: return 0.5;
  }
  return 0.0;
}

}  // namespace

double censoring_rate(const SimConfig& config) {
  const double target = censoring_target(config.censoring);
  if (target == 0.0) return 0.0;
  static std::mutex mutex;
  static std::map<std::tuple<int, double, int, bool, int, double>, double> cache;
  const auto key = std::make_tuple(static_cast<int>(config.structure), config.p0,
                                   static_cast<int>(config.hazard), config.time_varying,
                                   static_cast<int>(config.censoring), target);
  {
    std::lock_guard<std::mutex> lock(mutex);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }
  SimConfig cal = config;
  cal.n_subjects = 10000;
  cal.seed = 0x63656e73ULL;
  const auto covs = gen_covariates(cal);
  const auto latent = gen_latent(cal, covs);
  std::vector<SubjectSurvival> events;
  draw_events(cal, latent, covs, events);
  // Censoring time = entry + Exp(rate): Pr(censored) = 1 - exp(-rate * (T - L)).
  auto fraction = [&](double rate) {
    double s = 0.0;
    for (const auto& e : events) s += -std::expm1(-rate * (e.event_time - e.truncation));
    return s / static_cast<double>(events.size());
  };
  double lo = -30.0, hi = 10.0;  // log rate
  for (int it = 0; it < 100; ++it) {
    const double mid = 0.5 * (lo + hi);
    (fraction(std::exp(mid)) < target ? lo : hi) = mid;
  }
  const double rate = std::exp(0.5 * (lo + hi));
  std::lock_guard<std::mutex> lock(mutex);
  cache[key] = rate;
  return rate;
}

std::vector<SubjectSurvival> gen_survival(const SimConfig& config, const TrueLatent& latent,
                                          const std::vector<SubjectCovariates>& covariates) {
  std::vector<SubjectSurvival> out;
  draw_events(config, latent, covariates, out);
  const double rate = censoring_rate(config);
  std::exponential_distribution<double> expo(rate > 0.0 ? rate : 1.0);
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto& s = out[i];
    if (rate > 0.0) {
      auto rng = substream(config.seed, Stream::Censoring, i);
      s.censor_time = s.truncation + expo(rng);
    }
    s.observed.event_time = std::min(s.event_time, s.censor_time);
    s.observed.status = s.event_time <= s.censor_time ? 1 : 0;
  }
  return out;
}

LongDataset gen_longitudinal(const SimConfig& config, SimTruth& truth) {
  const auto n = truth.covariates.size();
  std::normal_distribution<double> normal(0.0, 1.0);
  std::poisson_distribution<int> poisson(1.0);
  truth.subject_effects.assign(n, 0.0);
  truth.record_class.assign(n, {});
  std::vector<SubjectRecords> subjects;
  subjects.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto rng = substream(config.seed, Stream::Longitudinal, i);
    const auto& cov = truth.covariates[i];
    const auto& surv = truth.survival[i];
    const auto& lat = truth.latent.subjects[i];
    const double lo = surv.truncation, hi = surv.observed.event_time;
    std::uniform_real_distribution<double> when(lo, hi);
    const int extra = 1 + poisson(rng);
    std::vector<double> times{lo};
    for (int k = 0; k < extra; ++k) times.push_back(when(rng));
    std::sort(times.begin(), times.end());
    times.erase(std::unique(times.begin(), times.end()), times.end());
    const double v = config.sigma_v * normal(rng);
    truth.subject_effects[i] = v;
    SubjectRecords rec;
    rec.id = std::to_string(i + 1);
    rec.event = surv.observed;
    for (double t : times) {
      const int cls = t <= cov.change_point ? lat.class_pre : lat.class_post;
      const auto& x = cov.at(t);
      LongRecord r;
      r.time = t;
      r.outcome = class_intercept(config.structure, cls) + v + config.sigma_e * normal(rng);
      r.covariates.assign(x.begin(), x.end());
      rec.records.push_back(std::move(r));
      truth.record_class[i].push_back(cls);
    }
    subjects.push_back(std::move(rec));
  }
  return LongDataset(simulation_covariate_names(), std::move(subjects));
}

SimulatedData simulate(const SimConfig& config) {
  config.validate();
  SimulatedData out;
  auto& truth = out.truth;
  truth.config = config;
  truth.covariates = gen_covariates(config);
  truth.latent = gen_latent(config, truth.covariates);
  truth.survival = gen_survival(config, truth.latent, truth.covariates);
  truth.censoring_rate = censoring_rate(config);
  out.data = gen_longitudinal(config, truth);
  return out;
}

Curve true_survival(const SimTruth& truth, std::size_t subject) {
  const auto base = BaselineSpec::of(truth.config.hazard);
  const double cp = truth.covariates.at(subject).change_point;
  const double m0 = truth.survival.at(subject).multiplier_pre;
  const double m1 = truth.survival.at(subject).multiplier_post;
  std::vector<double> knots;
  if (std::isfinite(cp)) knots.push_back(cp);
  return Curve::smooth(
      [=](double t) { return std::exp(-cumulative_hazard(base, cp, m0, m1, t)); }, knots);
}

}  // namespace jlct
