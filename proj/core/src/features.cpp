#include "portalchoice/features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <stdexcept>
#include <unordered_map>

#include "portalchoice/csv.hpp"

namespace portalchoice {

std::vector<int> detect_repeated_searches(
    const HouseholdPanel& panel, std::int64_t window_seconds,
    const std::unordered_set<std::string>& portal_sites) {
  if (window_seconds <= 0) throw std::invalid_argument("window_seconds must be positive");
  const auto& visits = panel.visits;
  std::vector<int> flags(visits.size(), 0);
  for (std::size_t v = 0; v < visits.size(); ++v) {
    // (a) the same goal is searched again within the window (start-to-start)
    if (visits[v].goal_id) {
      for (std::size_t w = v + 1; w < visits.size(); ++w) {
        if (visits[w].start_time - visits[v].start_time >= window_seconds) break;
        if (visits[w].goal_id == visits[v].goal_id) {
          flags[v] = 1;
          break;
        }
      }
    }
    // (b) the next visit is to a portal, starting within the window of this
    // visit's end
    if (!flags[v] && v + 1 < visits.size()) {
      const VisitRecord& next = visits[v + 1];
      if (portal_sites.count(next.site_id) &&
          next.start_time - visits[v].end_time < window_seconds)
        flags[v] = 1;
    }
  }
  return flags;
}

HouseholdOccasions build_occasions(const HouseholdPanel& panel,
                                   const std::vector<std::string>& choice_set,
                                   std::span<const int> repeated_flags) {
  if (choice_set.empty()) throw std::invalid_argument("empty choice set");
  if (repeated_flags.size() != panel.visits.size())
    throw std::invalid_argument("repeated_flags must be parallel to panel visits");

  std::unordered_map<std::string, int> index_of;
  for (std::size_t k = 0; k < choice_set.size(); ++k)
    index_of.emplace(choice_set[k], static_cast<int>(k));

  const int n_alts = static_cast<int>(choice_set.size());
  std::vector<char> seen(n_alts, 0);
  std::vector<std::int64_t> last_pages(n_alts, 0);
  std::vector<int> last_flag(n_alts, 0);
  int prev_chosen = -1;

  HouseholdOccasions out;
  out.household_id = panel.household_id;
  out.choice_set = choice_set;

  int t = 0;
  for (std::size_t v = 0; v < panel.visits.size(); ++v) {
    const VisitRecord& visit = panel.visits[v];
    auto it = index_of.find(visit.site_id);
    if (it == index_of.end()) continue;  // not a choice-set member
    const int j = it->second;
    ++t;

    ChoiceOccasion occ;
    occ.index = t;
    occ.chosen = j;
    occ.covariates.resize(n_alts);
    for (int k = 0; k < n_alts; ++k) {
      AlternativeCovariates& c = occ.covariates[k];
      if (!seen[k]) {
        c.missing_data = 1.0;  // no prior visit: other covariates stay zero
      } else {
        c.loyalty = (k == prev_chosen) ? 1.0 : 0.0;
        c.last_search_repeated = static_cast<double>(last_flag[k]);
        c.ln_last_pages = std::log(static_cast<double>(std::max<std::int64_t>(last_pages[k], 1)));
      }
    }
    out.occasions.push_back(std::move(occ));

    seen[j] = 1;
    last_pages[j] = visit.pages;
    last_flag[j] = repeated_flags[v];
    prev_chosen = j;
  }
  return out;
}

HouseholdAggregates household_aggregates(
    const HouseholdPanel& panel,
    const std::vector<std::string>& market_alternatives,
    std::span<const int> repeated_flags) {
  if (repeated_flags.size() != panel.visits.size())
    throw std::invalid_argument("repeated_flags must be parallel to panel visits");
  std::unordered_map<std::string, int> index_of;
  for (std::size_t k = 0; k < market_alternatives.size(); ++k)
    index_of.emplace(market_alternatives[k], static_cast<int>(k));

  HouseholdAggregates agg;
  agg.household_id = panel.household_id;
  agg.shares.assign(market_alternatives.size(), 0.0);

  std::int64_t n = 0, repeated = 0;
  for (std::size_t v = 0; v < panel.visits.size(); ++v) {
    auto it = index_of.find(panel.visits[v].site_id);
    if (it == index_of.end()) continue;
    ++n;
    agg.total_pages += panel.visits[v].pages;
    repeated += repeated_flags[v];
    agg.shares[it->second] += 1.0;
  }
  if (n == 0) throw std::invalid_argument("household has no market visits");
  agg.avg_pages = static_cast<double>(agg.total_pages) / static_cast<double>(n);
  agg.repeated_fraction = static_cast<double>(repeated) / static_cast<double>(n);
  for (double& s : agg.shares) s /= static_cast<double>(n);
  return agg;
}

void write_occasions(std::ostream& out,
                     const std::vector<HouseholdOccasions>& households) {
  out << "household_id,occasion_index,alternative,chosen,loyalty,"
         "last_search_repeated,ln_last_pages,missing_data\n";
  for (const auto& hh : households) {
    for (const auto& occ : hh.occasions) {
      for (std::size_t k = 0; k < hh.choice_set.size(); ++k) {
        const auto& c = occ.covariates[k];
        out << hh.household_id << ',' << occ.index << ',' << hh.choice_set[k]
            << ',' << (static_cast<int>(k) == occ.chosen ? 1 : 0) << ','
            << csv::format_double(c.loyalty) << ','
            << csv::format_double(c.last_search_repeated) << ','
            << csv::format_double(c.ln_last_pages) << ','
            << csv::format_double(c.missing_data) << '\n';
      }
    }
  }
}

std::vector<HouseholdOccasions> read_occasions(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("occasions file: no header");
  const std::string expected =
      "household_id,occasion_index,alternative,chosen,loyalty,"
      "last_search_repeated,ln_last_pages,missing_data";
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != expected)
    throw std::runtime_error("occasions file: unexpected header '" + line + "'");

  struct Row {
    int occasion;
    std::string alternative;
    int chosen;
    AlternativeCovariates cov;
  };
  std::map<std::string, std::vector<Row>> by_household;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto f = csv::split(line);
    if (f.size() != 8)
      throw std::runtime_error("occasions file line " + std::to_string(line_no) +
                               ": expected 8 fields");
    auto occasion = csv::parse_int(f[1]);
    auto chosen = csv::parse_int(f[3]);
    auto loyalty = csv::parse_double(f[4]);
    auto repeated = csv::parse_double(f[5]);
    auto ln_pages = csv::parse_double(f[6]);
    auto missing = csv::parse_double(f[7]);
    if (!occasion || !chosen || !loyalty || !repeated || !ln_pages || !missing)
      throw std::runtime_error("occasions file line " + std::to_string(line_no) +
                               ": malformed numeric field");
    by_household[f[0]].push_back(
        {static_cast<int>(*occasion), f[2], static_cast<int>(*chosen),
         {*loyalty, *repeated, *ln_pages, *missing}});
  }

  std::vector<HouseholdOccasions> out;
  out.reserve(by_household.size());
  for (auto& [id, rows] : by_household) {
    HouseholdOccasions hh;
    hh.household_id = id;
    // Alternatives in first-occasion row order; every occasion must list the
    // same set in the same order.
    std::size_t i = 0;
    while (i < rows.size()) {
      int occ_index = rows[i].occasion;
      ChoiceOccasion occ;
      occ.index = occ_index;
      occ.chosen = -1;
      std::vector<std::string> alts;
      while (i < rows.size() && rows[i].occasion == occ_index) {
        alts.push_back(rows[i].alternative);
        occ.covariates.push_back(rows[i].cov);
        if (rows[i].chosen) {
          if (occ.chosen != -1)
            throw std::runtime_error("household " + id + " occasion " +
                                     std::to_string(occ_index) + ": multiple chosen rows");
          occ.chosen = static_cast<int>(alts.size()) - 1;
        }
        ++i;
      }
      if (occ.chosen == -1)
        throw std::runtime_error("household " + id + " occasion " +
                                 std::to_string(occ_index) + ": no chosen row");
      if (hh.choice_set.empty()) {
        hh.choice_set = alts;
      } else if (alts != hh.choice_set) {
        throw std::runtime_error("household " + id +
                                 ": inconsistent alternative set across occasions");
      }
      hh.occasions.push_back(std::move(occ));
    }
    out.push_back(std::move(hh));
  }
  return out;
}

std::vector<HouseholdOccasions> read_occasions_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open occasions file: " + path);
  return read_occasions(in);
}

void write_aggregates(std::ostream& out,
                      const std::vector<std::string>& market_alternatives,
                      const std::vector<HouseholdAggregates>& rows) {
  out << "household_id,total_pages,avg_pages,pct_repeated";
  for (const auto& site : market_alternatives) out << ",share_" << site;
  out << '\n';
  for (const auto& a : rows) {
    out << a.household_id << ',' << a.total_pages << ','
        << csv::format_double(a.avg_pages) << ','
        << csv::format_double(a.repeated_fraction);
    for (double s : a.shares) out << ',' << csv::format_double(s);
    out << '\n';
  }
}

}  // namespace portalchoice
