#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "portalchoice/features.hpp"
#include "portalchoice/ingest.hpp"

namespace portalchoice {

// The global top-J alternatives, ordered by total visit count descending
// (ties broken by site_id). The reference alternative is the most visited
// unless overridden.
struct MarketDefinition {
  std::vector<std::string> alternatives;
  std::vector<std::int64_t> counts;  // parallel to alternatives
  std::size_t reference = 0;         // index into alternatives

  const std::string& reference_site() const { return alternatives[reference]; }
};

// Throws std::invalid_argument if fewer than top_j distinct sites exist or
// the override names a site outside the market.
MarketDefinition select_market(std::span<const VisitRecord> visits,
                               std::size_t top_j,
                               const std::optional<std::string>& reference_override = {});

struct HouseholdChoiceSet {
  std::vector<std::string> alternatives;  // market order
  bool estimable = false;                 // at least two alternatives
};

// Market alternatives the household visited at least once.
HouseholdChoiceSet household_choice_set(const HouseholdPanel& panel,
                                        const MarketDefinition& market);

// Dense design for one occasion: one row per alternative in the household's
// choice set, columns following HouseholdDesign::layout.
struct OccasionDesign {
  Eigen::MatrixXd x;
  int chosen = 0;  // row index
};

struct HouseholdDesign {
  std::string household_id;
  std::vector<std::string> choice_set;
  std::vector<std::string> layout;  // p column names
  int base = 0;                     // index into choice_set of the omitted dummy
  bool local_base = false;          // reference not in the set; dummies not comparable
  std::vector<OccasionDesign> occasions;
};

// Columns: the four covariates, then one dummy per non-base alternative in
// choice-set order. The base is the market reference when the household
// visited it, otherwise the lexicographically first member of its set
// (local_base = true).
HouseholdDesign assemble_design(const HouseholdOccasions& occasions,
                                const MarketDefinition& market);

inline std::string dummy_name(const std::string& site_id) {
  return "dummy:" + site_id;
}

// site_id,visits,is_reference — rows in market order.
void write_market(std::ostream& out, const MarketDefinition& market);
MarketDefinition read_market(std::istream& in);
MarketDefinition read_market_file(const std::string& path);

}  // namespace portalchoice
