#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ckm/error.hpp"
#include "ckm/observation.hpp"
#include "ckm/simulation.hpp"

namespace ckm::app {

struct RejectedRow {
  std::size_t line;  ///< 1-based line number in the file
  ErrorCode code;
  std::string reason;
};

/// Validated observations with their covariate column names.
struct Dataset {
  std::vector<Observation> rows;
  std::vector<std::string> covariate_names;
  /// Per-row values of an optional `p_hat` column.
  std::vector<double> p_hat;
  bool has_eta = false;
  bool has_p_hat = false;
  std::vector<RejectedRow> rejected;
  std::string source;
};

struct IngestOptions {
  /// Covariate columns to use, in order; empty means every z_<i> column.
  std::vector<std::string> covariates;
  bool require_eta = false;
  /// Drop bad rows instead of failing on the first one.
  bool skip_bad = false;
};

/// CSV with a header naming w, delta, optional eta and p_hat, and covariate
/// columns. Blank lines and lines starting with '#' are skipped. Without
/// skip_bad the first bad row throws its error naming the line.
Dataset ingest_csv(std::istream& in, const IngestOptions& options, std::string source = "");
Dataset ingest_csv(const std::filesystem::path& path, const IngestOptions& options);

/// Writes w, delta, [eta], z_1..z_k with round-trip precision.
void write_observations_csv(std::ostream& os, const std::vector<Observation>& rows,
                            const std::vector<std::string>& covariate_names);

/// Converts loan rows in calendar form to durations in months
/// (days / 30.4375) with delta = 1 for a default on or before the cutoff.
/// Covariates are (dti, ir).
std::vector<Observation> loans_to_observations(const std::vector<LoanRecord>& loans);

/// Loan CSV: issue_date,last_payment_date,default_date,cutoff_date,dti,ir with
/// ISO dates; default_date may be empty.
std::vector<LoanRecord> read_loans_csv(std::istream& in);
void write_loans_csv(std::ostream& os, const std::vector<LoanRecord>& loans);

}  // namespace ckm::app
