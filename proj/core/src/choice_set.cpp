#include "portalchoice/choice_set.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "portalchoice/csv.hpp"

namespace portalchoice {

MarketDefinition select_market(std::span<const VisitRecord> visits,
                               std::size_t top_j,
                               const std::optional<std::string>& reference_override) {
  if (top_j < 2) throw std::invalid_argument("market needs at least 2 alternatives");
  std::map<std::string, std::int64_t> counts;
  for (const auto& v : visits) ++counts[v.site_id];
  if (counts.size() < top_j)
    throw std::invalid_argument("fewer than " + std::to_string(top_j) +
                                " distinct sites in input (" +
                                std::to_string(counts.size()) + ")");

  std::vector<std::pair<std::string, std::int64_t>> ranked(counts.begin(), counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  MarketDefinition market;
  for (std::size_t i = 0; i < top_j; ++i) {
    market.alternatives.push_back(ranked[i].first);
    market.counts.push_back(ranked[i].second);
  }
  market.reference = 0;
  if (reference_override) {
    auto it = std::find(market.alternatives.begin(), market.alternatives.end(),
                        *reference_override);
    if (it == market.alternatives.end())
      throw std::invalid_argument("reference site '" + *reference_override +
                                  "' is not in the top-" + std::to_string(top_j) + " market");
    market.reference = static_cast<std::size_t>(it - market.alternatives.begin());
  }
  return market;
}

HouseholdChoiceSet household_choice_set(const HouseholdPanel& panel,
                                        const MarketDefinition& market) {
  std::unordered_set<std::string> visited;
  for (const auto& v : panel.visits) visited.insert(v.site_id);
  HouseholdChoiceSet set;
  for (const auto& site : market.alternatives)
    if (visited.count(site)) set.alternatives.push_back(site);
  set.estimable = set.alternatives.size() >= 2;
  return set;
}

HouseholdDesign assemble_design(const HouseholdOccasions& occasions,
                                const MarketDefinition& market) {
  const auto& set = occasions.choice_set;
  if (set.empty()) throw std::invalid_argument("empty choice set");

  HouseholdDesign design;
  design.household_id = occasions.household_id;
  design.choice_set = set;

  const std::string& reference = market.reference_site();
  auto ref_it = std::find(set.begin(), set.end(), reference);
  if (ref_it != set.end()) {
    design.base = static_cast<int>(ref_it - set.begin());
    design.local_base = false;
  } else {
    auto min_it = std::min_element(set.begin(), set.end());
    design.base = static_cast<int>(min_it - set.begin());
    design.local_base = true;
  }

  design.layout.assign(kCovariateNames.begin(), kCovariateNames.end());
  std::vector<int> dummy_col(set.size(), -1);  // alternative -> column, -1 for base
  for (std::size_t k = 0; k < set.size(); ++k) {
    if (static_cast<int>(k) == design.base) continue;
    dummy_col[k] = static_cast<int>(design.layout.size());
    design.layout.push_back(dummy_name(set[k]));
  }

  const auto n_alts = static_cast<Eigen::Index>(set.size());
  const auto p = static_cast<Eigen::Index>(design.layout.size());
  design.occasions.reserve(occasions.occasions.size());
  for (const auto& occ : occasions.occasions) {
    if (occ.covariates.size() != set.size())
      throw std::invalid_argument("occasion covariates do not match the choice set");
    OccasionDesign od;
    od.x = Eigen::MatrixXd::Zero(n_alts, p);
    od.chosen = occ.chosen;
    for (Eigen::Index k = 0; k < n_alts; ++k) {
      const auto& c = occ.covariates[static_cast<std::size_t>(k)];
      od.x(k, 0) = c.loyalty;
      od.x(k, 1) = c.last_search_repeated;
      od.x(k, 2) = c.ln_last_pages;
      od.x(k, 3) = c.missing_data;
      int col = dummy_col[static_cast<std::size_t>(k)];
      if (col >= 0) od.x(k, col) = 1.0;
    }
    design.occasions.push_back(std::move(od));
  }
  return design;
}

void write_market(std::ostream& out, const MarketDefinition& market) {
  out << "site_id,visits,is_reference\n";
  for (std::size_t i = 0; i < market.alternatives.size(); ++i)
    out << market.alternatives[i] << ',' << market.counts[i] << ','
        << (i == market.reference ? 1 : 0) << '\n';
}

MarketDefinition read_market(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("market file: no header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "site_id,visits,is_reference")
    throw std::runtime_error("market file: unexpected header '" + line + "'");
  MarketDefinition market;
  int n_ref = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    auto f = csv::split(line);
    if (f.size() != 3) throw std::runtime_error("market file: expected 3 fields");
    auto count = csv::parse_int(f[1]);
    auto is_ref = csv::parse_int(f[2]);
    if (!count || !is_ref) throw std::runtime_error("market file: malformed numeric field");
    if (*is_ref) {
      market.reference = market.alternatives.size();
      ++n_ref;
    }
    market.alternatives.push_back(f[0]);
    market.counts.push_back(*count);
  }
  if (market.alternatives.size() < 2)
    throw std::runtime_error("market file: fewer than 2 alternatives");
  if (n_ref != 1) throw std::runtime_error("market file: exactly one reference row required");
  return market;
}

MarketDefinition read_market_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open market file: " + path);
  return read_market(in);
}

}  // namespace portalchoice
