#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace jlct {

/// Column roles for the four covariate subsets and the bookkeeping columns of
/// a long-format file. The subsets may overlap.
struct VariableRoles {
  std::vector<std::string> split_vars;     // latent-class (tree) covariates
  std::vector<std::string> survival_vars;  // Cox covariates
  std::vector<std::string> fixed_vars;     // mixed-model fixed effects
  std::vector<std::string> random_vars;    // class-specific effects
  std::string subject_col = "ID";
  std::string time_col = "time";
  std::string outcome_col = "y";
  std::string event_time_col = "T";
  std::string status_col = "delta";

  /// Union of the four covariate lists in first-mention order.
  std::vector<std::string> covariates() const;
};

struct SubjectEvent {
  double event_time = 0.0;
  int status = 0;
};

struct LongRecord {
  double time = 0.0;
  double outcome = 0.0;
  std::vector<double> covariates;  // aligned with LongDataset::covariate_names()
};

struct SubjectRecords {
  std::string id;
  std::vector<LongRecord> records;  // strictly increasing in time
  SubjectEvent event;
};

/// Long-format longitudinal/survival panel. Immutable after construction; the
/// constructor checks the record invariants.
class LongDataset {
 public:
  LongDataset() = default;
  LongDataset(std::vector<std::string> covariate_names,
              std::vector<SubjectRecords> subjects);

  const std::vector<std::string>& covariate_names() const { return names_; }
  const std::vector<SubjectRecords>& subjects() const { return subjects_; }
  std::size_t n_subjects() const { return subjects_.size(); }
  std::size_t n_records() const;

  /// Throws Error(MissingColumn) for unknown names.
  std::size_t covariate_index(const std::string& name) const;
  bool has_covariate(const std::string& name) const;

  /// Subset of subjects, in the order given.
  LongDataset select_subjects(std::span<const std::size_t> indices) const;

 private:
  std::vector<std::string> names_;
  std::vector<SubjectRecords> subjects_;
};

/// Counting-process rows (start, stop, status] with covariates frozen over
/// [start, stop). Column-oriented.
struct LtrcDataset {
  std::vector<std::string> covariate_names;
  std::vector<std::string> subject_ids;
  std::vector<std::size_t> subject;  // row -> index into subject_ids
  std::vector<std::size_t> record;   // row -> record index within its subject
  std::vector<double> start;
  std::vector<double> stop;
  std::vector<int> status;
  std::vector<double> outcome;
  Eigen::MatrixXd covariates;  // rows x covariate_names.size()

  std::size_t size() const { return start.size(); }
  std::size_t covariate_index(const std::string& name) const;
  LtrcDataset subset(std::span<const std::size_t> rows) const;
};

LongDataset ingest_csv(const std::filesystem::path& path,
                       const VariableRoles& roles);
LongDataset read_csv(std::istream& in, const VariableRoles& roles);

/// Writes the layout read_csv consumes: subject, time, outcome, covariates,
/// event time, status.
void write_csv(std::ostream& out, const LongDataset& data,
               const VariableRoles& roles);

LtrcDataset to_ltrc(const LongDataset& data);

/// Replaces each named covariate by the subject's chronologically first value.
LongDataset first_encountered(const LongDataset& data,
                              const std::vector<std::string>& vars);

/// Appends `prefix + name` copies of the named covariates holding their first
/// encountered values; the originals are kept. Existing copies are rebuilt.
LongDataset add_first_encountered_columns(const LongDataset& data,
                                          const std::vector<std::string>& vars,
                                          const std::string& prefix);

/// Shortest round-trip decimal form of a double.
std::string format_double(double value);

}  // namespace jlct
