#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace portalchoice {

// One raw clickstream row: a single visit by a household to a site.
struct VisitRecord {
  std::string household_id;
  std::string site_id;
  std::int64_t start_time = 0;  // seconds since epoch
  std::int64_t end_time = 0;    // seconds since epoch, >= start_time
  std::int64_t pages = 0;       // pages viewed, >= 0
  std::optional<std::string> goal_id;  // search-goal label, when known

  bool operator==(const VisitRecord&) const = default;
};

// A household's visits, ascending by start_time; ties keep input order.
struct HouseholdPanel {
  std::string household_id;
  std::vector<VisitRecord> visits;

  bool operator==(const HouseholdPanel&) const = default;
};

struct RowError {
  std::size_t line = 0;  // 1-based physical line in the source
  std::string reason;
};

struct ParseResult {
  std::vector<VisitRecord> records;
  std::vector<RowError> errors;
};

// Header-level problems (missing/duplicate/unknown columns) abort the parse.
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Parses a comma-delimited visit table with header columns
//   household_id,site_id,start_time,end_time,pages[,goal_id]
// in any order. Malformed rows are reported in ParseResult::errors and
// skipped; they are never silently dropped.
ParseResult parse_visits(std::istream& in);
ParseResult parse_visits_file(const std::string& path);

// Partitions records into per-household panels, households sorted by id.
// Within a panel, visits are ordered by start_time with ties keeping the
// original record order.
std::vector<HouseholdPanel> build_panels(std::vector<VisitRecord> records);

// Canonical serialization; re-parsing the output reproduces the records
// (and hence the panels) exactly.
void write_visits(std::ostream& out, const std::vector<VisitRecord>& records);
void write_visits(std::ostream& out, const std::vector<HouseholdPanel>& panels);

}  // namespace portalchoice
