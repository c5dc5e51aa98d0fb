#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "portalchoice/ingest.hpp"

namespace portalchoice {

// Names of the four per-alternative covariates, in canonical order.
inline constexpr std::array<const char*, 4> kCovariateNames = {
    "loyalty", "last_search_repeated", "ln_last_pages", "missing_data"};

struct AlternativeCovariates {
  double loyalty = 0.0;               // 1 if chosen on the previous occasion
  double last_search_repeated = 0.0;  // repeat flag of the last visit to this site
  double ln_last_pages = 0.0;         // ln(max(pages,1)) of the last visit to this site
  double missing_data = 0.0;          // 1 if the household has never visited this site

  bool operator==(const AlternativeCovariates&) const = default;
};

// One decision instance. `chosen` and `covariates` are indexed by position
// in the household's choice-set ordering.
struct ChoiceOccasion {
  int index = 0;  // t, 1-based within the household
  int chosen = 0;
  std::vector<AlternativeCovariates> covariates;

  bool operator==(const ChoiceOccasion&) const = default;
};

struct HouseholdOccasions {
  std::string household_id;
  std::vector<std::string> choice_set;  // market-ordered sites the household visited
  std::vector<ChoiceOccasion> occasions;

  bool operator==(const HouseholdOccasions&) const = default;
};

// Flags each visit whose search was repeated: either the same goal_id is
// re-submitted within `window_seconds` of the visit's start, or the next
// visit in the panel is to a portal site and starts less than
// `window_seconds` after this visit ends.
std::vector<int> detect_repeated_searches(
    const HouseholdPanel& panel, std::int64_t window_seconds,
    const std::unordered_set<std::string>& portal_sites);

// Builds one occasion per visit to a member of `choice_set` (market order).
// Visits to other sites are ignored. `repeated_flags` is parallel to
// panel.visits. Throws std::invalid_argument on an empty choice set.
HouseholdOccasions build_occasions(const HouseholdPanel& panel,
                                   const std::vector<std::string>& choice_set,
                                   std::span<const int> repeated_flags);

// Household-level aggregates over the market visits, for the
// cross-household correlation table. `shares` is parallel to
// `market_alternatives` and sums to 1.
struct HouseholdAggregates {
  std::string household_id;
  std::int64_t total_pages = 0;
  double avg_pages = 0.0;
  double repeated_fraction = 0.0;
  std::vector<double> shares;
};

HouseholdAggregates household_aggregates(
    const HouseholdPanel& panel,
    const std::vector<std::string>& market_alternatives,
    std::span<const int> repeated_flags);

// Long-format occasion table:
//   household_id,occasion_index,alternative,chosen,loyalty,
//   last_search_repeated,ln_last_pages,missing_data
void write_occasions(std::ostream& out,
                     const std::vector<HouseholdOccasions>& households);
std::vector<HouseholdOccasions> read_occasions(std::istream& in);
std::vector<HouseholdOccasions> read_occasions_file(const std::string& path);

void write_aggregates(std::ostream& out,
                      const std::vector<std::string>& market_alternatives,
                      const std::vector<HouseholdAggregates>& rows);

}  // namespace portalchoice
