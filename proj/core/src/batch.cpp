#include "portalchoice/batch.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <thread>

#include "portalchoice/csv.hpp"

namespace portalchoice {

BatchResult run_batch(const std::vector<HouseholdDesign>& households,
                      const FitConfig& cfg, int workers) {
  const auto t0 = std::chrono::steady_clock::now();
  if (workers < 1) workers = 1;

  struct Slot {
    std::optional<HouseholdFit> fit;
    std::string skip_reason;
  };
  std::vector<Slot> slots(households.size());
  std::atomic<std::size_t> next{0};

  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
      if (i >= households.size()) return;
      const HouseholdDesign& hh = households[i];
      try {
        std::size_t usable = 0;
        for (const auto& occ : hh.occasions)
          if (occ.x.rows() >= 2) ++usable;
        switch (check_estimable(hh.choice_set.size(), usable, hh.layout.size(), cfg)) {
          case Estimability::too_few_alternatives:
            slots[i].skip_reason = "non_estimable";
            continue;
          case Estimability::too_few_occasions:
            slots[i].skip_reason = "too_few_occasions";
            continue;
          case Estimability::ok:
            break;
        }
        HouseholdFit fit = fit_household(hh, cfg);
        if (fit.flags.non_estimable) {
          slots[i].skip_reason = "non_estimable";
          continue;
        }
        slots[i].fit = std::move(fit);
      } catch (const std::exception& e) {
        slots[i].skip_reason = std::string("error: ") + e.what();
      }
    }
  };

  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }

  // Merge by household id, independent of the execution schedule.
  std::vector<std::size_t> order(households.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return households[a].household_id < households[b].household_id;
  });

  BatchResult result;
  for (std::size_t i : order) {
    if (slots[i].fit)
      result.fits.push_back(std::move(*slots[i].fit));
    else
      result.skipped.emplace_back(households[i].household_id, slots[i].skip_reason);
  }

  const auto t1 = std::chrono::steady_clock::now();
  result.wall_seconds = std::chrono::duration<double>(t1 - t0).count();
  result.households_per_second =
      result.wall_seconds > 0.0
          ? static_cast<double>(households.size()) / result.wall_seconds
          : 0.0;
  return result;
}

namespace {

std::string flags_cell(const HouseholdFit& fit) {
  std::string out;
  auto add = [&](bool on, const char* name) {
    if (!on) return;
    if (!out.empty()) out.push_back(';');
    out += name;
  };
  add(fit.flags.separation, "separation");
  add(fit.flags.singular_hessian, "singular_hessian");
  add(fit.flags.non_estimable, "non_estimable");
  add(fit.flags.hit_bound, "hit_bound");
  add(fit.local_base, "local_base");
  return out;
}

const char* significance_cell(int s) { return s > 0 ? "+" : (s < 0 ? "-" : "0"); }

}  // namespace

void write_fits_csv(std::ostream& out, const std::vector<HouseholdFit>& fits) {
  out << "household_id,variable,coefficient,se,z,significant,flags,"
         "loglik,iterations,converged\n";
  for (const auto& fit : fits) {
    const std::string flags = flags_cell(fit);
    for (std::size_t k = 0; k < fit.layout.size(); ++k) {
      const auto ki = static_cast<Eigen::Index>(k);
      out << fit.household_id << ',' << fit.layout[k] << ','
          << csv::format_double(fit.beta(ki)) << ',';
      if (fit.se) {
        const double se = (*fit.se)(ki);
        out << csv::format_double(se) << ',' << csv::format_double(fit.beta(ki) / se)
            << ',' << significance_cell(fit.significance[k]);
      } else {
        out << ",,0";
      }
      out << ',' << flags << ',' << csv::format_double(fit.loglik) << ','
          << fit.iterations << ',' << (fit.converged ? 1 : 0) << '\n';
    }
  }
}

void write_skipped_csv(std::ostream& out,
                       const std::vector<std::pair<std::string, std::string>>& skipped) {
  out << "household_id,reason\n";
  for (const auto& [id, reason] : skipped) out << id << ',' << reason << '\n';
}

std::vector<FitRecord> read_fits_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("fits file: no header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line !=
      "household_id,variable,coefficient,se,z,significant,flags,loglik,"
      "iterations,converged")
    throw std::runtime_error("fits file: unexpected header '" + line + "'");

  std::vector<FitRecord> out;
  std::set<std::string> seen;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto f = csv::split(line);
    if (f.size() != 10)
      throw std::runtime_error("fits file line " + std::to_string(line_no) +
                               ": expected 10 fields");
    if (out.empty() || out.back().household_id != f[0]) {
      if (!seen.insert(f[0]).second)
        throw std::runtime_error("fits file line " + std::to_string(line_no) +
                                 ": household " + f[0] + " rows are not contiguous");
      FitRecord rec;
      rec.household_id = f[0];
      auto loglik = csv::parse_double(f[7]);
      auto iterations = csv::parse_int(f[8]);
      auto converged = csv::parse_int(f[9]);
      if (!loglik || !iterations || !converged)
        throw std::runtime_error("fits file line " + std::to_string(line_no) +
                                 ": malformed numeric field");
      rec.loglik = *loglik;
      rec.iterations = static_cast<int>(*iterations);
      rec.converged = *converged != 0;
      const std::string& flags = f[6];
      std::size_t pos = 0;
      while (pos < flags.size()) {
        std::size_t semi = flags.find(';', pos);
        if (semi == std::string::npos) semi = flags.size();
        if (semi > pos) rec.flags.insert(flags.substr(pos, semi - pos));
        pos = semi + 1;
      }
      out.push_back(std::move(rec));
    }
    FitRecord& rec = out.back();
    auto coef = csv::parse_double(f[2]);
    if (!coef)
      throw std::runtime_error("fits file line " + std::to_string(line_no) +
                               ": malformed coefficient");
    rec.variables.push_back(f[1]);
    rec.coefficients.push_back(*coef);
    if (f[3].empty()) {
      rec.se.push_back(std::nullopt);
    } else {
      auto se = csv::parse_double(f[3]);
      if (!se)
        throw std::runtime_error("fits file line " + std::to_string(line_no) +
                                 ": malformed se");
      rec.se.push_back(*se);
    }
    rec.significance.push_back(f[5] == "+" ? 1 : (f[5] == "-" ? -1 : 0));
  }
  return out;
}

std::vector<FitRecord> read_fits_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open fits file: " + path);
  return read_fits_csv(in);
}

FitRecord to_fit_record(const HouseholdFit& fit) {
  FitRecord rec;
  rec.household_id = fit.household_id;
  rec.loglik = fit.loglik;
  rec.iterations = fit.iterations;
  rec.converged = fit.converged;
  if (fit.flags.separation) rec.flags.insert("separation");
  if (fit.flags.singular_hessian) rec.flags.insert("singular_hessian");
  if (fit.flags.non_estimable) rec.flags.insert("non_estimable");
  if (fit.flags.hit_bound) rec.flags.insert("hit_bound");
  if (fit.local_base) rec.flags.insert("local_base");
  for (std::size_t k = 0; k < fit.layout.size(); ++k) {
    const auto ki = static_cast<Eigen::Index>(k);
    rec.variables.push_back(fit.layout[k]);
    rec.coefficients.push_back(fit.beta(ki));
    rec.se.push_back(fit.se ? std::optional<double>((*fit.se)(ki)) : std::nullopt);
    rec.significance.push_back(fit.se ? fit.significance[k] : 0);
  }
  return rec;
}

}  // namespace portalchoice
