// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// criterion fails. Run through ctest or directly from the build tree.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "oracles.hpp"
#include "portalchoice/analytics.hpp"
#include "portalchoice/batch.hpp"
#include "portalchoice/choice_set.hpp"
#include "portalchoice/features.hpp"
#include "portalchoice/ingest.hpp"
#include "portalchoice/logit.hpp"
#include "portalchoice/synth.hpp"

using namespace portalchoice;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

void report(int criterion, bool pass, const std::string& what,
            const std::string& detail = "") {
  std::printf("%s criterion %d: %s%s%s\n", pass ? "PASS" : "FAIL", criterion,
              what.c_str(), detail.empty() ? "" : " — ", detail.c_str());
  if (!pass) ++g_failures;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* format, double a, double b = 0.0, double c = 0.0,
                double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), format, a, b, c, d);
  return buf;
}

HouseholdDesign design_from(std::vector<OccasionDesign> occasions, int n_alts, int p,
                            const std::string& id = "h1") {
  HouseholdDesign hh;
  hh.household_id = id;
  for (int k = 0; k < n_alts; ++k) hh.choice_set.push_back("a" + std::to_string(k));
  for (int c = 0; c < p; ++c) hh.layout.push_back("x" + std::to_string(c));
  hh.occasions = std::move(occasions);
  return hh;
}

HouseholdDesign intercept_only(int n1, int n0) {
  Eigen::MatrixXd x(2, 1);
  x << 0, 1;
  std::vector<OccasionDesign> occasions;
  for (int i = 0; i < n1; ++i) occasions.push_back({x, 1});
  for (int i = 0; i < n0; ++i) occasions.push_back({x, 0});
  return design_from(std::move(occasions), 2, 1);
}

// ---- criterion 1: analytic derivatives vs central finite differences -------

void criterion_1() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  double worst_grad = 0.0, worst_hess = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const int n_alts = 2 + static_cast<int>(rng() % 5);   // [2,6]
    const int p = 2 + static_cast<int>(rng() % 8);        // [2,9]
    const int T = 20 + static_cast<int>(rng() % 181);     // [20,200]
    auto inst = oracle::random_instance(rng, n_alts, p, T);
    Eigen::VectorXd beta(p);
    for (int c = 0; c < p; ++c) beta(c) = oracle::uniform(rng, -1.0, 1.0);

    const auto r = loglik_grad_hess(beta, inst.occasions);
    const auto fd_g = oracle::fd_gradient(beta, inst.occasions, 1e-5);
    const auto fd_h = oracle::fd_hessian(beta, inst.occasions, 1e-4);
    worst_grad = std::max(worst_grad,
                          (r.grad - fd_g).lpNorm<Eigen::Infinity>() /
                              std::max(1.0, fd_g.lpNorm<Eigen::Infinity>()));
    worst_hess = std::max(worst_hess,
                          (r.hess - fd_h).cwiseAbs().maxCoeff() /
                              std::max(1.0, fd_h.cwiseAbs().maxCoeff()));
  }
  const double elapsed = seconds_since(t0);
  report(1, worst_grad < 1e-6 && worst_hess < 1e-4 && elapsed < 10.0,
         "gradient/Hessian match finite differences on 100 random instances",
         fmt("max rel err grad %.2e, hess %.2e, %.1f s", worst_grad, worst_hess,
             elapsed));
}

// ---- criterion 2: Newton fits vs exhaustive grid search --------------------

void criterion_2() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(202);
  double worst = 0.0;
  int used = 0;
  FitConfig cfg;
  for (int rep = 0; rep < 50; ++rep) {
    const int p = 1 + (rep % 2);
    const int T = 30 + static_cast<int>(rng() % 71);  // [30,100]
    auto inst = oracle::random_instance(rng, 2, p, T);
    auto hh = design_from(inst.occasions, 2, p);
    auto fit = fit_household(hh, cfg);
    if (!fit.converged || fit.flags.hit_bound) {
      report(2, false, "fit vs grid search",
             "instance " + std::to_string(rep) + " did not converge cleanly");
      return;
    }
    const auto grid = oracle::grid_search_max(inst.occasions, p);
    for (int c = 0; c < p; ++c)
      worst = std::max(worst, std::abs(fit.beta(c) - grid(c)));
    ++used;
  }
  const double elapsed = seconds_since(t0);
  report(2, worst <= 2e-3 && elapsed < 30.0 && used == 50,
         "fits match grid search (range [-10,10], 1e-3, refined once) on 50 instances",
         fmt("max coordinate gap %.2e, %.1f s", worst, elapsed));
}

// ---- criterion 3: closed-form anchor ----------------------------------------

void criterion_3() {
  FitConfig cfg;
  auto fit = fit_household(intercept_only(30, 10), cfg);
  const double beta_err = std::abs(fit.beta(0) - std::log(3.0));
  const double se_expected = std::sqrt(1.0 / 30.0 + 1.0 / 10.0);
  const bool se_ok = fit.se && std::abs((*fit.se)(0) - se_expected) <= 1e-4;
  report(3, fit.converged && beta_err <= 1e-4 && se_ok,
         "choice counts (30,10) give coefficient ln 3 and se sqrt(1/30+1/10)",
         fmt("|beta - ln3| = %.2e, se gap %.2e", beta_err,
             fit.se ? std::abs((*fit.se)(0) - se_expected) : -1.0));
}

// ---- criteria 4-6 share one synthetic data set ------------------------------

struct SyntheticRun {
  SimulationResult sim;
  MarketDefinition market;
  std::vector<HouseholdDesign> designs;
  BatchResult batch;  // single worker
  double fit_seconds = 0.0;
  double pipeline_seconds = 0.0;
};

SyntheticRun run_synthetic_pipeline() {
  SyntheticRun run;
  GeneratorSpec spec;
  spec.n_households = 500;
  spec.occasions_min = spec.occasions_max = 300;
  spec.n_alternatives = 5;
  spec.seed = 424242;
  run.sim = simulate_panel(spec);

  const auto t0 = Clock::now();
  // through the wire format, as the real pipeline would run
  std::ostringstream visits_text;
  write_visits(visits_text, run.sim.visits);
  std::istringstream visits_in(visits_text.str());
  auto parsed = parse_visits(visits_in);
  auto panels = build_panels(std::move(parsed.records));
  run.market = select_market(run.sim.visits, 5, std::string("p1"));
  const std::unordered_set<std::string> market_set(run.market.alternatives.begin(),
                                                   run.market.alternatives.end());
  for (const auto& panel : panels) {
    auto flags = detect_repeated_searches(panel, 300, market_set);
    auto set = household_choice_set(panel, run.market);
    if (set.alternatives.empty()) continue;
    run.designs.push_back(
        assemble_design(build_occasions(panel, set.alternatives, flags), run.market));
  }
  FitConfig cfg;
  const auto fit_t0 = Clock::now();
  run.batch = run_batch(run.designs, cfg, 1);
  run.fit_seconds = seconds_since(fit_t0);
  run.pipeline_seconds = seconds_since(t0);
  return run;
}

void criterion_4(const SyntheticRun& run) {
  // truth lookup: household -> variable -> value
  std::map<std::string, std::map<std::string, double>> truth;
  for (const auto& t : run.sim.truth)
    for (std::size_t k = 0; k < t.variables.size(); ++k)
      truth[t.household_id][t.variables[k]] = t.values[k];

  std::map<std::string, std::pair<double, double>> err_and_se;  // var -> (sum|err|, sum se)
  std::map<std::string, int> n_pairs;
  long covered = 0, total = 0;
  FitConfig cfg;
  for (const auto& fit : run.batch.fits) {
    if (!fit.se) continue;
    const auto& hh_truth = truth.at(fit.household_id);
    for (std::size_t k = 0; k < fit.layout.size(); ++k) {
      const auto ki = static_cast<Eigen::Index>(k);
      if (std::abs(fit.beta(ki)) >= cfg.beta_bound) continue;  // divergent
      auto it = hh_truth.find(fit.layout[k]);
      if (it == hh_truth.end()) continue;
      const double err = std::abs(fit.beta(ki) - it->second);
      const double se = (*fit.se)(ki);
      auto& acc = err_and_se[fit.layout[k]];
      acc.first += err;
      acc.second += se;
      ++n_pairs[fit.layout[k]];
      ++total;
      if (err <= 1.96 * se) ++covered;
    }
  }

  bool errors_ok = !err_and_se.empty();
  std::string worst_var;
  double worst_ratio = 0.0;
  for (const auto& [var, acc] : err_and_se) {
    const double mean_err = acc.first / n_pairs[var];
    const double mean_se = acc.second / n_pairs[var];
    const double ratio = mean_err / (3.0 * mean_se);
    if (ratio > worst_ratio) {
      worst_ratio = ratio;
      worst_var = var;
    }
    if (mean_err >= 3.0 * mean_se) errors_ok = false;
  }
  const double coverage = total > 0 ? 100.0 * covered / total : 0.0;
  const bool coverage_ok = coverage >= 92.0 && coverage <= 98.0;
  const bool runtime_ok = run.pipeline_seconds < 120.0;
  report(4, errors_ok && coverage_ok && runtime_ok,
         "500x300 synthetic recovery through the full pipeline",
         fmt("worst mean|err|/3*mean(se) %.2f, Wald coverage %.1f%%, %.1f s",
             worst_ratio, coverage, run.pipeline_seconds) +
             (worst_var.empty() ? "" : " (worst: " + worst_var + ")"));
}

void criterion_5(const SyntheticRun& run) {
  std::ostringstream visits_text;
  write_visits(visits_text, run.sim.visits);
  std::istringstream in(visits_text.str());
  auto parsed = parse_visits(in);
  auto panels = build_panels(std::move(parsed.records));

  const std::unordered_set<std::string> market(run.sim.market_sites.begin(),
                                               run.sim.market_sites.end());
  long long equal_cells = 0, cells = 0;
  for (std::size_t h = 0; h < panels.size(); ++h) {
    auto flags = detect_repeated_searches(panels[h], 300, market);
    auto derived = build_occasions(panels[h], run.sim.market_sites, flags);
    const auto& generated = run.sim.generated[h];
    if (derived.occasions.size() != generated.occasions.size()) {
      report(5, false, "round-trip feature consistency", "occasion count drifted");
      return;
    }
    for (std::size_t t = 0; t < derived.occasions.size(); ++t)
      for (std::size_t k = 0; k < run.sim.market_sites.size(); ++k) {
        ++cells;
        if (derived.occasions[t].covariates[k] == generated.occasions[t].covariates[k])
          ++equal_cells;
      }
  }
  const double share = cells > 0 ? 100.0 * equal_cells / cells : 0.0;
  report(5, share >= 99.9,
         "covariates re-derived from emitted visits equal generation-time values",
         fmt("%.4f%% of %.0f cells identical", share, static_cast<double>(cells)));
}

void criterion_6(const SyntheticRun& run) {
  FitConfig cfg;
  const fs::path dir = fs::temp_directory_path() / "portalchoice_acceptance";
  fs::create_directories(dir);

  auto write_result = [&](const BatchResult& result, const char* name) {
    std::ofstream out(dir / name, std::ios::binary);
    write_fits_csv(out, result.fits);
  };
  auto slurp = [&](const char* name) {
    std::ifstream in(dir / name, std::ios::binary);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
  };

  write_result(run.batch, "fits_serial.csv");
  auto parallel = run_batch(run.designs, cfg, 4);
  write_result(parallel, "fits_parallel.csv");
  const bool identical = slurp("fits_serial.csv") == slurp("fits_parallel.csv");

  auto timed = [&](int workers) {
    double best = 1e300;
    for (int rep = 0; rep < 3; ++rep) {
      const auto t0 = Clock::now();
      auto result = run_batch(run.designs, cfg, workers);
      best = std::min(best, seconds_since(t0));
      if (result.fits.size() != run.batch.fits.size()) return 1e300;
    }
    return best;
  };
  const double serial = timed(1);
  const double four = timed(4);
  const double speedup = serial / four;

  report(6, identical && speedup >= 3.0,
         "batch output byte-identical across worker counts, >= 3x speedup at 4 workers",
         fmt("identical: %.0f, speedup %.2fx (serial %.2fs / 4 workers %.2fs)",
             identical ? 1.0 : 0.0, speedup, serial, four) +
             ", " + std::to_string(std::thread::hardware_concurrency()) +
             " hardware threads");
  fs::remove_all(dir);
}

// ---- criterion 7: invariant suite -------------------------------------------

void criterion_7() {
  std::mt19937_64 rng(707);
  bool normalization = true, translation = true, equivariance = true,
       ascent = true, matrix_ok = true;

  for (int rep = 0; rep < 300; ++rep) {
    const int n = 2 + static_cast<int>(rng() % 5);
    const int p = 1 + static_cast<int>(rng() % 8);
    Eigen::MatrixXd x(n, p);
    for (int k = 0; k < n; ++k)
      for (int c = 0; c < p; ++c) x(k, c) = oracle::uniform(rng, -5, 5);
    Eigen::VectorXd beta(p);
    for (int c = 0; c < p; ++c) beta(c) = oracle::uniform(rng, -10, 10);
    auto prob = choice_probabilities(beta, x);
    if (std::abs(prob.sum() - 1.0) > 1e-12 || prob.minCoeff() <= 0.0)
      normalization = false;

    Eigen::VectorXd u = x * beta;
    Eigen::VectorXd shifted = u.array() + oracle::uniform(rng, -100, 100);
    if ((softmax_utilities(u) - softmax_utilities(shifted)).lpNorm<Eigen::Infinity>() >
        1e-12)
      translation = false;
  }

  FitConfig cfg;
  for (int rep = 0; rep < 5; ++rep) {
    auto inst = oracle::random_instance(rng, 3, 3, 120, 0.8);
    auto hh = design_from(inst.occasions, 3, 3);
    FitConfig traced = cfg;
    traced.record_path = true;
    auto base = fit_household(hh, traced);
    if (!base.converged) equivariance = false;
    for (std::size_t i = 1; i < base.loglik_path.size(); ++i)
      if (base.loglik_path[i] < base.loglik_path[i - 1]) ascent = false;

    const double scale = oracle::uniform(rng, 0.2, 5.0);
    HouseholdDesign scaled = hh;
    for (auto& occ : scaled.occasions) occ.x.col(2) *= scale;
    auto fit = fit_household(scaled, cfg);
    if (std::abs(fit.beta(2) * scale - base.beta(2)) > 1e-6 ||
        std::abs(fit.loglik - base.loglik) > 1e-8)
      equivariance = false;
  }

  for (int rep = 0; rep < 5; ++rep) {
    CorrelationInput input;
    const int labels = 5, n = 30;
    for (int l = 0; l < labels; ++l) {
      input.labels.push_back("v" + std::to_string(l));
      std::vector<std::optional<double>> col;
      for (int i = 0; i < n; ++i) col.emplace_back(oracle::uniform(rng, -4, 4));
      input.values.push_back(std::move(col));
    }
    auto m = correlate(input);
    for (int a = 0; a < labels; ++a) {
      if (m.r(a, a) != 1.0) matrix_ok = false;
      for (int b = 0; b < labels; ++b) {
        if (m.r(a, b) != m.r(b, a) || std::abs(m.r(a, b)) > 1.0) matrix_ok = false;
        if (m.significant[a][b] != m.significant[b][a]) matrix_ok = false;
      }
    }
  }

  report(7, normalization && translation && equivariance && ascent && matrix_ok,
         "invariants: normalization 1e-12, translation 1e-12, scale equivariance 1e-8, "
         "monotone ascent, correlation matrix shape",
         std::string("normalization ") + (normalization ? "ok" : "BROKEN") +
             ", translation " + (translation ? "ok" : "BROKEN") + ", equivariance " +
             (equivariance ? "ok" : "BROKEN") + ", ascent " + (ascent ? "ok" : "BROKEN") +
             ", matrix " + (matrix_ok ? "ok" : "BROKEN"));
}

// ---- criterion 8: separation fixture ----------------------------------------

void criterion_8() {
  FitConfig cfg;
  auto separated = fit_household(intercept_only(30, 0), cfg);
  const bool flagged = separated.flags.hit_bound &&
                       std::abs(separated.beta(0)) == cfg.beta_bound && !separated.se;

  auto normal_a = fit_household(intercept_only(25, 15), cfg);
  normal_a.household_id = "h_a";
  auto normal_b = fit_household(intercept_only(18, 22), cfg);
  normal_b.household_id = "h_b";
  separated.household_id = "h_sep";

  std::vector<FitRecord> records = {to_fit_record(normal_a), to_fit_record(normal_b),
                                    to_fit_record(separated)};
  auto summary = summarize_coefficients(records, cfg.beta_bound);
  bool tallied = false, excluded = false;
  for (const auto& row : summary.rows) {
    if (row.variable != "x0") continue;
    tallied = row.n_divergent == 1 && row.n_households == 2;
    const double expected_mean =
        (normal_a.beta(0) + normal_b.beta(0)) / 2.0;
    excluded = std::abs(row.mean - expected_mean) <= 1e-12;
  }
  report(8, flagged && tallied && excluded,
         "an always-one-of-two household hits the +/-20 bound, leaves the moments, "
         "joins the divergent tally",
         flagged ? (tallied && excluded ? "" : "summary handling wrong")
                 : "bound flag missing");
}

// ---- criterion 9: output schema fidelity ------------------------------------

void criterion_9() {
  FitConfig cfg;
  std::vector<HouseholdDesign> households;
  std::mt19937_64 rng(909);
  for (int i = 0; i < 6; ++i) {
    auto inst = oracle::random_instance(rng, 3, 2, 60, 0.7);
    households.push_back(design_from(std::move(inst.occasions), 3, 2,
                                     "h" + std::to_string(i)));
  }
  auto batch = run_batch(households, cfg, 1);
  std::vector<FitRecord> records;
  for (const auto& fit : batch.fits) records.push_back(to_fit_record(fit));

  std::ostringstream table3;
  write_summary_csv(table3, summarize_coefficients(records, cfg.beta_bound));
  std::istringstream t3(table3.str());
  std::string header;
  std::getline(t3, header);
  const bool summary_ok =
      header ==
      "variable,mean,se_of_mean,sd,pct_sig_pos,pct_sig_neg,n_households,n_divergent";

  auto matrix = correlate(coefficient_vectors(records, cfg.beta_bound));
  std::ostringstream table4;
  write_correlation_csv(table4, matrix);
  std::istringstream t4(table4.str());
  std::getline(t4, header);
  bool matrix_ok = header.rfind("variable,", 0) == 0;
  std::vector<std::vector<std::string>> cells;
  std::string line;
  bool footnote = false;
  while (std::getline(t4, line)) {
    if (line.rfind("#", 0) == 0) {
      footnote = line.find("95%") != std::string::npos;
      continue;
    }
    std::vector<std::string> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(cell);
    cells.push_back(row);
  }
  // square, unit diagonal, symmetric text cells
  if (cells.empty()) matrix_ok = false;
  for (std::size_t a = 0; a < cells.size() && matrix_ok; ++a) {
    if (cells[a].size() != cells.size() + 1) matrix_ok = false;
    for (std::size_t b = 0; matrix_ok && b < cells.size(); ++b) {
      if (a == b && cells[a][b + 1] != "1") matrix_ok = false;
      if (cells[a][b + 1] != cells[b][a + 1]) matrix_ok = false;
    }
  }
  report(9, summary_ok && matrix_ok && footnote,
         "summary has the five statistic columns; correlation matrix is symmetric "
         "with 95% significance marks",
         std::string("summary header ") + (summary_ok ? "ok" : "WRONG") +
             ", matrix " + (matrix_ok ? "ok" : "WRONG") + ", footnote " +
             (footnote ? "ok" : "MISSING"));
}

}  // namespace

int main() {
  criterion_1();
  criterion_2();
  criterion_3();
  auto synthetic = run_synthetic_pipeline();
  criterion_4(synthetic);
  criterion_5(synthetic);
  criterion_6(synthetic);
  criterion_7();
  criterion_8();
  criterion_9();

  if (g_failures == 0) {
    std::printf("all acceptance criteria satisfied\n");
  } else {
    std::printf("%d criterion(s) failed\n", g_failures);
  }
  return g_failures == 0 ? 0 : 1;
}
