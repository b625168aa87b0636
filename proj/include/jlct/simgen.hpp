#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "jlct/curve.hpp"
#include "jlct/data.hpp"

namespace jlct {

enum class Structure { Tree, Linear, Nonlinear, Asymmetric, Null };
enum class HazardFamily { Exponential, WeibullD, WeibullI };
enum class Censoring { None, Light, Heavy };

const char* to_string(Structure s);
const char* to_string(HazardFamily h);
const char* to_string(Censoring c);
Structure parse_structure(const std::string& s);
HazardFamily parse_hazard(const std::string& s);
Censoring parse_censoring(const std::string& s);

/// Baseline hazard: exponential H0(t) = rate * t, Weibull H0(t) = (t / scale)^shape.
struct BaselineSpec {
  HazardFamily family = HazardFamily::WeibullI;
  double rate = 0.1;
  double shape = 3.0;
  double scale = 2.0;

  static BaselineSpec of(HazardFamily family);
  double cumulative(double t) const;
  double inverse(double h) const;
};

struct SimConfig {
  std::size_t n_subjects = 500;
  Structure structure = Structure::Tree;
  double p0 = 1.0;
  HazardFamily hazard = HazardFamily::WeibullI;
  Censoring censoring = Censoring::Light;
  bool time_varying = true;
  std::uint64_t seed = 1;
  double sigma_v = 0.2;
  double sigma_e = 0.1;

  void validate() const;
};

inline constexpr std::size_t kSimCovariates = 5;
using CovariateVector = std::array<double, kSimCovariates>;

/// Independent random streams; each (seed, stream, subject) triple gets its
/// own engine so streams do not perturb one another.
enum class Stream : std::uint64_t { Covariates = 1, Classes = 2, Survival = 3, Censoring = 4, Longitudinal = 5 };
std::mt19937_64 substream(std::uint64_t seed, Stream stream, std::uint64_t subject);

/// Piecewise-constant covariates of one subject: `pre` on [0, change_point],
/// `post` afterwards. Time-invariant subjects have change_point = +inf.
struct SubjectCovariates {
  double change_point = Curve::kUnbounded;
  CovariateVector pre{};
  CovariateVector post{};

  const CovariateVector& at(double t) const { return t <= change_point ? pre : post; }
};

/// True class per covariate piece plus the majority classes behind it.
struct SubjectLatent {
  int class_pre = 1;
  int class_post = 1;
  int majority_pre = 1;
  int majority_post = 1;
};

struct TrueLatent {
  std::vector<SubjectLatent> subjects;
  double concentration = 0.0;  // softmax scale C; +inf for deterministic assignment
};

/// Event process of one subject.
struct SubjectSurvival {
  double truncation = 0.0;
  double event_time = 0.0;   // latent event time
  double censor_time = Curve::kUnbounded;
  double multiplier_pre = 1.0;
  double multiplier_post = 1.0;
  SubjectEvent observed;
};

struct SimTruth {
  SimConfig config;
  TrueLatent latent;
  std::vector<SubjectCovariates> covariates;
  std::vector<SubjectSurvival> survival;
  std::vector<double> subject_effects;         // v_i
  std::vector<std::vector<int>> record_class;  // true class at each measurement
  double censoring_rate = 0.0;
};

struct SimulatedData {
  LongDataset data;
  SimTruth truth;
};

/// Roles used throughout the simulation study: X3..X5 for survival, X1..X5
/// for the tree and both mixed-model parts.
VariableRoles simulation_roles();
std::vector<std::string> simulation_covariate_names();

int majority_class(Structure structure, double x1, double x2);
double calibrate_concentration(Structure structure, double p0);

/// Class-specific survival slopes on (X3, X4, X5); the null structure uses the
/// last row for everyone.
std::array<double, 3> true_slopes(Structure structure, HazardFamily hazard, int cls);
/// Class intercept u_g of the longitudinal model (0 for the null structure).
double class_intercept(Structure structure, int cls);

/// Post-change covariates from the pre-change values and the drawn
/// perturbations: X1, X2, X4 shifted and clamped to [0, 1], X3 replaced,
/// X5 shifted and clamped to [1, 5].
CovariateVector apply_change(const CovariateVector& pre, double d1, double d2, double x3_new, double d4,
                             int d5);

std::vector<SubjectCovariates> gen_covariates(const SimConfig& config);
TrueLatent gen_latent(const SimConfig& config, const std::vector<SubjectCovariates>& covariates);
std::vector<SubjectSurvival> gen_survival(const SimConfig& config, const TrueLatent& latent,
                                          const std::vector<SubjectCovariates>& covariates);
/// Adds measurement schedules and outcomes; fills truth.record_class and
/// truth.subject_effects.
LongDataset gen_longitudinal(const SimConfig& config, SimTruth& truth);

SimulatedData simulate(const SimConfig& config);

/// Exponential censoring rate (censoring time = entry + Exp(rate)) giving the
/// configured censoring fraction; 0 for no censoring. Cached per scenario.
double censoring_rate(const SimConfig& config);

/// True survival curve of subject i, S(t) = exp(-H_i(t)) from time 0.
Curve true_survival(const SimTruth& truth, std::size_t subject);

}  // namespace jlct
