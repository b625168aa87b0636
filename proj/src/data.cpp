#include "jlct/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "jlct/error.hpp"

namespace jlct {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MissingColumn: return "missing-column";
    case ErrorKind::Ordering: return "ordering";
    case ErrorKind::EmptySubject: return "empty-subject";
    case ErrorKind::Inconsistent: return "inconsistent";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Shape: return "shape";
    case ErrorKind::InsufficientEvents: return "insufficient-events";
    case ErrorKind::DegenerateDesign: return "degenerate-design";
    case ErrorKind::Unfittable: return "unfittable";
    case ErrorKind::Calibration: return "calibration";
    case ErrorKind::Coverage: return "coverage";
    case ErrorKind::UnknownClass: return "unknown-class";
    case ErrorKind::Usage: return "usage";
  }
  return "unknown";
}

std::vector<std::string> VariableRoles::covariates() const {
  std::vector<std::string> out;
  for (const auto* list : {&split_vars, &survival_vars, &fixed_vars, &random_vars}) {
    for (const auto& name : *list) {
      if (std::find(out.begin(), out.end(), name) == out.end()) out.push_back(name);
    }
  }
  return out;
}

std::string format_double(double value) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

// ---------------------------------------------------------------------------
// LongDataset

LongDataset::LongDataset(std::vector<std::string> covariate_names,
                         std::vector<SubjectRecords> subjects)
    : names_(std::move(covariate_names)), subjects_(std::move(subjects)) {
  for (const auto& s : subjects_) {
    if (s.records.empty()) {
      throw Error(ErrorKind::EmptySubject, "subject '" + s.id + "' has no measurements");
    }
    for (std::size_t k = 0; k < s.records.size(); ++k) {
      const auto& r = s.records[k];
      if (r.covariates.size() != names_.size()) {
        throw Error(ErrorKind::Shape, "subject '" + s.id + "': covariate count mismatch");
      }
      if (k > 0 && !(r.time > s.records[k - 1].time)) {
        throw Error(ErrorKind::Ordering, "subject '" + s.id +
                                             "': measurement times must be strictly increasing");
      }
    }
    if (s.event.status != 0 && s.event.status != 1) {
      throw Error(ErrorKind::Inconsistent, "subject '" + s.id + "': status must be 0 or 1");
    }
    if (s.event.event_time < s.records.back().time) {
      throw Error(ErrorKind::Inconsistent,
                  "subject '" + s.id + "': event time precedes the last measurement");
    }
  }
}

std::size_t LongDataset::n_records() const {
  std::size_t n = 0;
  for (const auto& s : subjects_) n += s.records.size();
  return n;
}

std::size_t LongDataset::covariate_index(const std::string& name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) throw Error(ErrorKind::MissingColumn, "unknown covariate '" + name + "'");
  return static_cast<std::size_t>(it - names_.begin());
}

bool LongDataset::has_covariate(const std::string& name) const {
  return std::find(names_.begin(), names_.end(), name) != names_.end();
}

LongDataset LongDataset::select_subjects(std::span<const std::size_t> indices) const {
  std::vector<SubjectRecords> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(subjects_.at(i));
  return LongDataset(names_, std::move(out));
}

// ---------------------------------------------------------------------------
// LtrcDataset

std::size_t LtrcDataset::covariate_index(const std::string& name) const {
  auto it = std::find(covariate_names.begin(), covariate_names.end(), name);
  if (it == covariate_names.end()) {
    throw Error(ErrorKind::MissingColumn, "unknown covariate '" + name + "'");
  }
  return static_cast<std::size_t>(it - covariate_names.begin());
}

LtrcDataset LtrcDataset::subset(std::span<const std::size_t> rows) const {
  LtrcDataset out;
  out.covariate_names = covariate_names;
  out.subject_ids = subject_ids;
  const auto n = rows.size();
  out.subject.reserve(n);
  out.record.reserve(n);
  out.start.reserve(n);
  out.stop.reserve(n);
  out.status.reserve(n);
  out.outcome.reserve(n);
  out.covariates.resize(static_cast<Eigen::Index>(n), covariates.cols());
  for (std::size_t k = 0; k < n; ++k) {
    const auto r = rows[k];
    out.subject.push_back(subject[r]);
    out.record.push_back(record[r]);
    out.start.push_back(start[r]);
    out.stop.push_back(stop[r]);
    out.status.push_back(status[r]);
    out.outcome.push_back(outcome[r]);
    out.covariates.row(static_cast<Eigen::Index>(k)) = covariates.row(static_cast<Eigen::Index>(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (char c : line) {
    if (c == '"') {
      quoted = !quoted;
    } else if (c == ',' && !quoted) {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  for (auto& f : fields) {
    auto b = f.find_first_not_of(" \t");
    auto e = f.find_last_not_of(" \t");
    f = b == std::string::npos ? std::string() : f.substr(b, e - b + 1);
  }
  return fields;
}

double parse_real(const std::string& field, const std::string& column, std::size_t line_no) {
  double value = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  if (!field.empty() && *first == '+') ++first;
  auto res = std::from_chars(first, last, value);
  if (field.empty() || res.ec != std::errc() || res.ptr != last || !std::isfinite(value)) {
    throw Error(ErrorKind::Parse, "line " + std::to_string(line_no) + ": column '" + column +
                                      "' value '" + field + "' is not a finite real");
  }
  return value;
}

}  // namespace

LongDataset ingest_csv(const std::filesystem::path& path, const VariableRoles& roles) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Usage, "cannot open '" + path.string() + "'");
  return read_csv(in, roles);
}

LongDataset read_csv(std::istream& in, const VariableRoles& roles) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::Parse, "missing header row");
  const auto header = split_line(line);
  auto column = [&](const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw Error(ErrorKind::MissingColumn, "column '" + name + "' not found");
    return static_cast<std::size_t>(it - header.begin());
  };
  const auto id_col = column(roles.subject_col);
  const auto time_col = column(roles.time_col);
  const auto y_col = column(roles.outcome_col);
  const auto t_col = column(roles.event_time_col);
  const auto d_col = column(roles.status_col);
  const auto names = roles.covariates();
  std::vector<std::size_t> cov_cols;
  for (const auto& n : names) cov_cols.push_back(column(n));

  std::vector<SubjectRecords> subjects;
  std::unordered_map<std::string, std::size_t> index;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto f = split_line(line);
    if (f.size() != header.size()) {
      throw Error(ErrorKind::Parse, "line " + std::to_string(line_no) + ": expected " +
                                        std::to_string(header.size()) + " fields");
    }
    const auto& id = f[id_col];
    LongRecord rec;
    rec.time = parse_real(f[time_col], roles.time_col, line_no);
    rec.outcome = parse_real(f[y_col], roles.outcome_col, line_no);
    for (std::size_t k = 0; k < cov_cols.size(); ++k) {
      rec.covariates.push_back(parse_real(f[cov_cols[k]], names[k], line_no));
    }
    SubjectEvent ev{parse_real(f[t_col], roles.event_time_col, line_no), 0};
    const double status = parse_real(f[d_col], roles.status_col, line_no);
    if (status != 0.0 && status != 1.0) {
      throw Error(ErrorKind::Parse, "line " + std::to_string(line_no) + ": status must be 0 or 1");
    }
    ev.status = static_cast<int>(status);

    auto [it, inserted] = index.emplace(id, subjects.size());
    if (inserted) {
      subjects.push_back(SubjectRecords{id, {}, ev});
    } else {
      auto& s = subjects[it->second];
      if (s.event.event_time != ev.event_time || s.event.status != ev.status) {
        throw Error(ErrorKind::Inconsistent,
                    "subject '" + id + "': event columns differ between rows");
      }
      if (!(rec.time > s.records.back().time)) {
        throw Error(ErrorKind::Ordering, "subject '" + id + "': time " + f[time_col] +
                                             " does not follow " +
                                             format_double(s.records.back().time));
      }
    }
    subjects[index[id]].records.push_back(std::move(rec));
  }
  return LongDataset(names, std::move(subjects));
}

void write_csv(std::ostream& out, const LongDataset& data, const VariableRoles& roles) {
  out << roles.subject_col << ',' << roles.time_col << ',' << roles.outcome_col;
  for (const auto& n : data.covariate_names()) out << ',' << n;
  out << ',' << roles.event_time_col << ',' << roles.status_col << '\n';
  for (const auto& s : data.subjects()) {
    for (const auto& r : s.records) {
      out << s.id << ',' << format_double(r.time) << ',' << format_double(r.outcome);
      for (double x : r.covariates) out << ',' << format_double(x);
      out << ',' << format_double(s.event.event_time) << ',' << s.event.status << '\n';
    }
  }
}

// ---------------------------------------------------------------------------
// Conversions

LtrcDataset to_ltrc(const LongDataset& data) {
  LtrcDataset out;
  out.covariate_names = data.covariate_names();
  const auto p = static_cast<Eigen::Index>(out.covariate_names.size());
  std::vector<std::vector<double>> rows;
  rows.reserve(data.n_records());
  for (std::size_t i = 0; i < data.subjects().size(); ++i) {
    const auto& s = data.subjects()[i];
    out.subject_ids.push_back(s.id);
    const auto n = s.records.size();
    if (s.event.event_time < s.records.back().time) {
      throw Error(ErrorKind::Inconsistent, "subject '" + s.id + "': event before last measurement");
    }
    for (std::size_t k = 0; k < n; ++k) {
      const double lo = s.records[k].time;
      const double hi = k + 1 < n ? s.records[k + 1].time : s.event.event_time;
      const int status = k + 1 < n ? 0 : s.event.status;
      if (!(lo < hi)) {
        // Zero-length final interval: its event moves to the previous row.
        if (status == 1 && !out.status.empty() && out.subject.back() == i) out.status.back() = 1;
        continue;
      }
      out.subject.push_back(i);
      out.record.push_back(k);
      out.start.push_back(lo);
      out.stop.push_back(hi);
      out.status.push_back(status);
      out.outcome.push_back(s.records[k].outcome);
      rows.push_back(s.records[k].covariates);
    }
  }
  out.covariates.resize(static_cast<Eigen::Index>(rows.size()), p);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (Eigen::Index j = 0; j < p; ++j) {
      out.covariates(static_cast<Eigen::Index>(r), j) = rows[r][static_cast<std::size_t>(j)];
    }
  }
  return out;
}

LongDataset first_encountered(const LongDataset& data, const std::vector<std::string>& vars) {
  std::vector<std::size_t> cols;
  for (const auto& v : vars) cols.push_back(data.covariate_index(v));
  auto subjects = data.subjects();
  for (auto& s : subjects) {
    for (auto c : cols) {
      const double first = s.records.front().covariates[c];
      for (auto& r : s.records) r.covariates[c] = first;
    }
  }
  return LongDataset(data.covariate_names(), std::move(subjects));
}

LongDataset add_first_encountered_columns(const LongDataset& data,
                                          const std::vector<std::string>& vars,
                                          const std::string& prefix) {
  auto names = data.covariate_names();
  std::vector<std::size_t> src, dst;
  for (const auto& v : vars) {
    src.push_back(data.covariate_index(v));
    const auto derived = prefix + v;
    auto it = std::find(names.begin(), names.end(), derived);
    if (it == names.end()) {
      dst.push_back(names.size());
      names.push_back(derived);
    } else {
      dst.push_back(static_cast<std::size_t>(it - names.begin()));
    }
  }
  auto subjects = data.subjects();
  for (auto& s : subjects) {
    for (auto& r : s.records) r.covariates.resize(names.size(), 0.0);
    for (std::size_t k = 0; k < src.size(); ++k) {
      const double first = s.records.front().covariates[src[k]];
      for (auto& r : s.records) r.covariates[dst[k]] = first;
    }
  }
  return LongDataset(std::move(names), std::move(subjects));
}

}  // namespace jlct
