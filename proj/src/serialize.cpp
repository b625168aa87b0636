#include "jlct/serialize.hpp"

#include <cmath>
#include <fstream>

#include "jlct/error.hpp"

namespace jlct {

using nlohmann::json;

namespace {

constexpr int kModelFormat = 1;

json vec(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd to_vec(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json mat(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(vec(m.row(r).transpose()));
  return rows;
}

Eigen::MatrixXd to_mat(const json& j) {
  const auto n = static_cast<Eigen::Index>(j.size());
  Eigen::MatrixXd m(n, n > 0 ? static_cast<Eigen::Index>(j[0].size()) : 0);
  for (Eigen::Index r = 0; r < n; ++r) m.row(r) = to_vec(j[static_cast<std::size_t>(r)]).transpose();
  return m;
}

json cox_to_json(const CoxFit& f) {
  return json{{"names", f.names},
              {"coefficients", vec(f.coefficients)},
              {"vcov", mat(f.vcov)},
              {"log_partial_lik", f.log_partial_lik},
              {"n_events", f.n_events},
              {"iterations", f.iterations},
              {"converged", f.converged},
              {"monotone", f.monotone},
              {"baseline", {{"event_times", f.baseline.event_times},
                            {"cumulative_hazard", f.baseline.cumulative_hazard}}}};
}

CoxFit cox_from_json(const json& j) {
  CoxFit f;
  f.names = j.at("names").get<std::vector<std::string>>();
  f.coefficients = to_vec(j.at("coefficients"));
  f.vcov = to_mat(j.at("vcov"));
  f.log_partial_lik = j.at("log_partial_lik").get<double>();
  f.n_events = j.at("n_events").get<int>();
  f.iterations = j.at("iterations").get<int>();
  f.converged = j.at("converged").get<bool>();
  f.monotone = j.at("monotone").get<bool>();
  f.baseline.event_times = j.at("baseline").at("event_times").get<std::vector<double>>();
  f.baseline.cumulative_hazard = j.at("baseline").at("cumulative_hazard").get<std::vector<double>>();
  return f;
}

json lmm_to_json(const LmmFit& f) {
  return json{{"fixed_vars", f.fixed_vars},
              {"random_vars", f.random_vars},
              {"classes", f.classes},
              {"column_names", f.column_names},
              {"dropped_columns", f.dropped_columns},
              {"coefficients", vec(f.coefficients)},
              {"var_subject", f.var_subject},
              {"var_resid", f.var_resid},
              {"var_class", f.var_class},
              {"variance_ratio", f.variance_ratio},
              {"boundary", f.boundary},
              {"loglik", f.loglik},
              {"subject_effects", f.subject_effects}};
}

LmmFit lmm_from_json(const json& j) {
  LmmFit f;
  f.fixed_vars = j.at("fixed_vars").get<std::vector<std::string>>();
  f.random_vars = j.at("random_vars").get<std::vector<std::string>>();
  f.classes = j.at("classes").get<std::vector<int>>();
  f.column_names = j.at("column_names").get<std::vector<std::string>>();
  f.dropped_columns = j.at("dropped_columns").get<std::vector<std::string>>();
  f.coefficients = to_vec(j.at("coefficients"));
  f.var_subject = j.at("var_subject").get<double>();
  f.var_resid = j.at("var_resid").get<double>();
  f.var_class = j.at("var_class").get<double>();
  f.variance_ratio = j.at("variance_ratio").get<double>();
  f.boundary = j.at("boundary").get<bool>();
  f.loglik = j.at("loglik").get<double>();
  f.subject_effects = j.at("subject_effects").get<std::map<std::string, double>>();
  return f;
}

json controls_to_json(const SplitControls& c) {
  return json{{"min_node_rows", c.min_node_rows},   {"min_events", c.min_events},
              {"variance_bound", c.variance_bound}, {"stop_threshold", c.stop_threshold},
              {"max_terminal_nodes", c.max_terminal_nodes}};
}

SplitControls controls_from_json(const json& j) {
  SplitControls c;
  c.min_node_rows = j.at("min_node_rows").get<std::size_t>();
  c.min_events = j.at("min_events").get<int>();
  c.variance_bound = j.at("variance_bound").get<double>();
  c.stop_threshold = j.at("stop_threshold").get<double>();
  c.max_terminal_nodes = j.at("max_terminal_nodes").get<std::size_t>();
  return c;
}

TestReason reason_from_string(const std::string& s) {
  for (auto r : {TestReason::Valid, TestReason::TooFewEvents, TestReason::NonConvergence,
                 TestReason::VarianceBound, TestReason::DegenerateDesign}) {
    if (s == to_string(r)) return r;
  }
  throw Error(ErrorKind::Parse, "unknown test reason '" + s + "'");
}

json node_to_json(const TreeNode& n) {
  json j{{"id", n.id},
         {"depth", n.depth},
         {"row_fraction", n.row_fraction},
         {"closure", to_string(n.closure)},
         {"ts", n.test.ts},
         {"valid", n.test.valid},
         {"reason", to_string(n.test.reason)},
         {"n_events", n.test.n_events},
         {"n_rows", n.test.n_rows}};
  if (n.split) {
    j["split"] = {{"variable", n.split->variable}, {"threshold", n.split->threshold}, {"score", n.split->score}};
  }
  if (n.children) j["children"] = {n.children->first, n.children->second};
  return j;
}

TreeNode node_from_json(const json& j) {
  TreeNode n;
  n.id = j.at("id").get<int>();
  n.depth = j.at("depth").get<int>();
  n.row_fraction = j.at("row_fraction").get<double>();
  n.closure = closure_from_string(j.at("closure").get<std::string>());
  n.test.ts = j.at("ts").get<double>();
  n.test.valid = j.at("valid").get<bool>();
  n.test.reason = reason_from_string(j.at("reason").get<std::string>());
  n.test.n_events = j.at("n_events").get<int>();
  n.test.n_rows = j.at("n_rows").get<std::size_t>();
  if (j.contains("split")) {
    const auto& s = j["split"];
    n.split = TreeSplit{s.at("variable").get<std::string>(), s.at("threshold").get<double>(),
                        s.at("score").get<double>()};
  }
  if (j.contains("children")) n.children = std::make_pair(j["children"][0].get<int>(), j["children"][1].get<int>());
  return n;
}

}  // namespace

VariableRoles roles_from_json(const json& j) {
  try {
    VariableRoles r;
    auto list = [&](const char* key) {
      return j.contains(key) ? j[key].get<std::vector<std::string>>() : std::vector<std::string>{};
    };
    auto name = [&](const char* key, std::string& field) {
      if (j.contains(key)) field = j[key].get<std::string>();
    };
    r.split_vars = list("split");
    r.survival_vars = list("survival");
    r.fixed_vars = list("fixed");
    r.random_vars = list("random");
    name("subject", r.subject_col);
    name("time", r.time_col);
    name("outcome", r.outcome_col);
    name("event_time", r.event_time_col);
    name("status", r.status_col);
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Parse, std::string("roles: ") + e.what());
  }
}

json roles_to_json(const VariableRoles& r) {
  return json{{"split", r.split_vars},         {"survival", r.survival_vars},  {"fixed", r.fixed_vars},
              {"random", r.random_vars},       {"subject", r.subject_col},     {"time", r.time_col},
              {"outcome", r.outcome_col},      {"event_time", r.event_time_col}, {"status", r.status_col}};
}

VariableRoles read_roles(const std::filesystem::path& path) { return roles_from_json(read_json(path)); }

json model_to_json(const JlctModel& model) {
  const auto& t = model.tree;
  json nodes = json::array();
  for (const auto& [id, node] : t.nodes) nodes.push_back(node_to_json(node));
  json leaves = json::object();
  for (const auto& [leaf, m] : t.leaf_models) {
    leaves[std::to_string(leaf)] = {{"flagged", m.flagged}, {"cox", cox_to_json(m.cox)}};
  }
  json j{{"format", kModelFormat},
         {"variant", to_string(model.variant)},
         {"input_roles", roles_to_json(model.input_roles)},
         {"roles", roles_to_json(t.roles)},
         {"controls", controls_to_json(t.controls)},
         {"grown_leaves", model.grown_leaves},
         {"root_id", t.root_id},
         {"nodes", nodes},
         {"has_models", t.has_models}};
  if (t.has_models) {
    j["shared_baseline"] = t.shared_baseline;
    j["root_fit"] = cox_to_json(t.root_fit);
    j["leaf_models"] = leaves;
    j["longitudinal"] = lmm_to_json(t.longitudinal);
  }
  return j;
}

JlctModel model_from_json(const json& j) {
  try {
    if (j.at("format").get<int>() != kModelFormat) throw Error(ErrorKind::Parse, "unsupported model format");
    JlctModel m;
    m.variant = parse_variant(j.at("variant").get<std::string>());
    m.input_roles = roles_from_json(j.at("input_roles"));
    m.grown_leaves = j.at("grown_leaves").get<std::size_t>();
    auto& t = m.tree;
    t.roles = roles_from_json(j.at("roles"));
    t.controls = controls_from_json(j.at("controls"));
    t.root_id = j.at("root_id").get<int>();
    for (const auto& n : j.at("nodes")) {
      auto node = node_from_json(n);
      t.nodes[node.id] = std::move(node);
    }
    t.has_models = j.at("has_models").get<bool>();
    if (t.has_models) {
      t.shared_baseline = j.at("shared_baseline").get<bool>();
      t.root_fit = cox_from_json(j.at("root_fit"));
      for (const auto& [key, lm] : j.at("leaf_models").items()) {
        t.leaf_models[std::stoi(key)] = LeafModel{cox_from_json(lm.at("cox")), lm.at("flagged").get<bool>()};
      }
      t.longitudinal = lmm_from_json(j.at("longitudinal"));
    }
    return m;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Parse, std::string("model file: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Simulation truth

namespace {

// JSON has no infinity; absent change points and censoring times are null.
json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
double null_as_inf(const json& j) { return j.is_null() ? Curve::kUnbounded : j.get<double>(); }

}  // namespace

json truth_to_json(const SimTruth& truth) {
  const auto& c = truth.config;
  json subjects = json::array();
  for (std::size_t i = 0; i < truth.survival.size(); ++i) {
    const auto& cov = truth.covariates[i];
    const auto& s = truth.survival[i];
    const auto& l = truth.latent.subjects[i];
    subjects.push_back({{"id", std::to_string(i + 1)},
                        {"change_point", finite_or_null(cov.change_point)},
                        {"pre", cov.pre},
                        {"post", cov.post},
                        {"class_pre", l.class_pre},
                        {"class_post", l.class_post},
                        {"majority_pre", l.majority_pre},
                        {"majority_post", l.majority_post},
                        {"truncation", s.truncation},
                        {"event_time", s.event_time},
                        {"censor_time", finite_or_null(s.censor_time)},
                        {"multiplier_pre", s.multiplier_pre},
                        {"multiplier_post", s.multiplier_post},
                        {"subject_effect", truth.subject_effects[i]},
                        {"record_class", truth.record_class[i]}});
  }
  return json{{"config",
               {{"n_subjects", c.n_subjects},
                {"structure", to_string(c.structure)},
                {"p0", c.p0},
                {"hazard", to_string(c.hazard)},
                {"censoring", to_string(c.censoring)},
                {"time_varying", c.time_varying},
                {"seed", c.seed},
                {"sigma_v", c.sigma_v},
                {"sigma_e", c.sigma_e}}},
              {"concentration", finite_or_null(truth.latent.concentration)},
              {"censoring_rate", truth.censoring_rate},
              {"subjects", subjects}};
}

SimTruth truth_from_json(const json& j) {
  try {
    SimTruth t;
    const auto& c = j.at("config");
    t.config.n_subjects = c.at("n_subjects").get<std::size_t>();
    t.config.structure = parse_structure(c.at("structure").get<std::string>());
    t.config.p0 = c.at("p0").get<double>();
    t.config.hazard = parse_hazard(c.at("hazard").get<std::string>());
    t.config.censoring = parse_censoring(c.at("censoring").get<std::string>());
    t.config.time_varying = c.at("time_varying").get<bool>();
    t.config.seed = c.at("seed").get<std::uint64_t>();
    t.config.sigma_v = c.at("sigma_v").get<double>();
    t.config.sigma_e = c.at("sigma_e").get<double>();
    t.latent.concentration = null_as_inf(j.at("concentration"));
    t.censoring_rate = j.at("censoring_rate").get<double>();
    for (const auto& s : j.at("subjects")) {
      SubjectCovariates cov;
      cov.change_point = null_as_inf(s.at("change_point"));
      cov.pre = s.at("pre").get<CovariateVector>();
      cov.post = s.at("post").get<CovariateVector>();
      t.covariates.push_back(cov);
      t.latent.subjects.push_back({s.at("class_pre").get<int>(), s.at("class_post").get<int>(),
                                   s.at("majority_pre").get<int>(), s.at("majority_post").get<int>()});
      SubjectSurvival sv;
      sv.truncation = s.at("truncation").get<double>();
      sv.event_time = s.at("event_time").get<double>();
      sv.censor_time = null_as_inf(s.at("censor_time"));
      sv.multiplier_pre = s.at("multiplier_pre").get<double>();
      sv.multiplier_post = s.at("multiplier_post").get<double>();
      sv.observed.event_time = std::min(sv.event_time, sv.censor_time);
      sv.observed.status = sv.event_time <= sv.censor_time ? 1 : 0;
      t.survival.push_back(sv);
      t.subject_effects.push_back(s.at("subject_effect").get<double>());
      t.record_class.push_back(s.at("record_class").get<std::vector<int>>());
    }
    return t;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Parse, std::string("truth file: ") + e.what());
  }
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Usage, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Parse, path.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Usage, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace jlct
