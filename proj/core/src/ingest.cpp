#include "portalchoice/ingest.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include "portalchoice/csv.hpp"

namespace portalchoice {

namespace {

struct ColumnMap {
  int household = -1, site = -1, start = -1, end = -1, pages = -1, goal = -1;
  std::size_t width = 0;
};

ColumnMap parse_header(const std::string& line) {
  auto names = csv::split(line);
  ColumnMap cols;
  cols.width = names.size();
  for (std::size_t i = 0; i < names.size(); ++i) {
    const std::string& n = names[i];
    int* slot = nullptr;
    if (n == "household_id") slot = &cols.household;
    else if (n == "site_id") slot = &cols.site;
    else if (n == "start_time") slot = &cols.start;
    else if (n == "end_time") slot = &cols.end;
    else if (n == "pages") slot = &cols.pages;
    else if (n == "goal_id") slot = &cols.goal;
    else throw SchemaError("unknown column '" + n + "'");
    if (*slot != -1) throw SchemaError("duplicate column '" + n + "'");
    *slot = static_cast<int>(i);
  }
  const std::pair<const char*, int> required[] = {{"household_id", cols.household},
                                                  {"site_id", cols.site},
                                                  {"start_time", cols.start},
                                                  {"end_time", cols.end},
                                                  {"pages", cols.pages}};
  for (const auto& [name, index] : required)
    if (index == -1) throw SchemaError(std::string("missing required column '") + name + "'");
  return cols;
}

}  // namespace

ParseResult parse_visits(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("empty input: no header row");
  ColumnMap cols = parse_header(line);

  ParseResult result;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto fields = csv::split(line);
    if (fields.size() != cols.width) {
      result.errors.push_back({line_no, "expected " + std::to_string(cols.width) +
                                            " fields, got " + std::to_string(fields.size())});
      continue;
    }
    VisitRecord rec;
    rec.household_id = fields[cols.household];
    rec.site_id = fields[cols.site];
    if (rec.household_id.empty()) {
      result.errors.push_back({line_no, "empty household_id"});
      continue;
    }
    if (rec.site_id.empty()) {
      result.errors.push_back({line_no, "empty site_id"});
      continue;
    }
    auto start = csv::parse_int(fields[cols.start]);
    auto end = csv::parse_int(fields[cols.end]);
    auto pages = csv::parse_int(fields[cols.pages]);
    if (!start) {
      result.errors.push_back({line_no, "non-integer start_time '" + fields[cols.start] + "'"});
      continue;
    }
    if (!end) {
      result.errors.push_back({line_no, "non-integer end_time '" + fields[cols.end] + "'"});
      continue;
    }
    if (!pages) {
      result.errors.push_back({line_no, "non-integer pages '" + fields[cols.pages] + "'"});
      continue;
    }
    if (*end < *start) {
      result.errors.push_back({line_no, "end_time before start_time"});
      continue;
    }
    if (*pages < 0) {
      result.errors.push_back({line_no, "negative pages"});
      continue;
    }
    rec.start_time = *start;
    rec.end_time = *end;
    rec.pages = *pages;
    if (cols.goal != -1 && !fields[cols.goal].empty()) rec.goal_id = fields[cols.goal];
    result.records.push_back(std::move(rec));
  }
  return result;
}

ParseResult parse_visits_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open input file: " + path);
  return parse_visits(in);
}

std::vector<HouseholdPanel> build_panels(std::vector<VisitRecord> records) {
  // Group by household in first-appearance order, then sort the ids.
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < records.size(); ++i)
    groups[records[i].household_id].push_back(i);

  std::vector<HouseholdPanel> panels;
  panels.reserve(groups.size());
  for (auto& [id, idx] : groups) {
    // Stable on record index, so equal start times keep input order.
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return records[a].start_time < records[b].start_time;
    });
    HouseholdPanel panel;
    panel.household_id = id;
    panel.visits.reserve(idx.size());
    for (std::size_t i : idx) panel.visits.push_back(records[i]);
    panels.push_back(std::move(panel));
  }
  return panels;
}

namespace {

void write_visit_row(std::ostream& out, const VisitRecord& v) {
  out << v.household_id << ',' << v.site_id << ',' << v.start_time << ','
      << v.end_time << ',' << v.pages << ',' << (v.goal_id ? *v.goal_id : "")
      << '\n';
}

}  // namespace

void write_visits(std::ostream& out, const std::vector<VisitRecord>& records) {
  out << "household_id,site_id,start_time,end_time,pages,goal_id\n";
  for (const auto& v : records) write_visit_row(out, v);
}

void write_visits(std::ostream& out, const std::vector<HouseholdPanel>& panels) {
  out << "household_id,site_id,start_time,end_time,pages,goal_id\n";
  for (const auto& p : panels)
    for (const auto& v : p.visits) write_visit_row(out, v);
}

}  // namespace portalchoice
