#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "portalchoice/logit.hpp"

namespace portalchoice {

struct BatchResult {
  std::vector<HouseholdFit> fits;                              // sorted by household_id
  std::vector<std::pair<std::string, std::string>> skipped;    // id -> reason, sorted
  double wall_seconds = 0.0;
  double households_per_second = 0.0;
};

// Fits every household, one work unit each, across `workers` threads.
// Exceptions in a single fit become a skipped entry, never abort the batch.
// Output is ordered by household_id and identical for any worker count.
BatchResult run_batch(const std::vector<HouseholdDesign>& households,
                      const FitConfig& cfg, int workers);

// fits.csv: household_id,variable,coefficient,se,z,significant,flags,
//           loglik,iterations,converged
void write_fits_csv(std::ostream& out, const std::vector<HouseholdFit>& fits);
void write_skipped_csv(std::ostream& out,
                       const std::vector<std::pair<std::string, std::string>>& skipped);

// Analytics-facing view of one household read back from fits.csv.
struct FitRecord {
  std::string household_id;
  std::vector<std::string> variables;
  std::vector<double> coefficients;
  std::vector<std::optional<double>> se;
  std::vector<int> significance;  // +1/-1/0
  std::set<std::string> flags;
  double loglik = 0.0;
  int iterations = 0;
  bool converged = false;

  bool has_flag(const std::string& f) const { return flags.count(f) != 0; }
};

std::vector<FitRecord> read_fits_csv(std::istream& in);
std::vector<FitRecord> read_fits_csv_file(const std::string& path);

// The exact view write_fits_csv + read_fits_csv would produce, without I/O.
FitRecord to_fit_record(const HouseholdFit& fit);

}  // namespace portalchoice
