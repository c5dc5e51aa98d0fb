// portalchoice: estimate per-household conditional-logit models of portal
// choice from clickstream visit logs, then summarize the coefficient vectors
// across households.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <unordered_set>
#include <vector>

#include "portalchoice/analytics.hpp"
#include "portalchoice/batch.hpp"
#include "portalchoice/choice_set.hpp"
#include "portalchoice/csv.hpp"
#include "portalchoice/features.hpp"
#include "portalchoice/ingest.hpp"
#include "portalchoice/logit.hpp"
#include "portalchoice/synth.hpp"
#include "portalchoice/version.hpp"

namespace pc = portalchoice;
namespace fs = std::filesystem;

namespace {

// Input problems exit 1; anything else escaping to main exits 2.
class UserError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Settings {
  int top_j = 15;
  std::string reference;  // empty: most-visited site
  long long window_seconds = 300;
  int max_iterations = 100;
  double grad_tol = 1e-6;
  double loglik_tol = 1e-9;
  double beta_bound = 20.0;
  int min_occasions_margin = 2;
  int workers = 0;  // 0: one per hardware thread
  long long seed = -1;  // simulate: overrides the generator spec seed when >= 0
};

void apply_config_file(const std::string& path, Settings& s) {
  std::ifstream in(path);
  if (!in) throw UserError("cannot open config file: " + path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto trim = [](std::string str) {
      const char* ws = " \t";
      const auto b = str.find_first_not_of(ws);
      if (b == std::string::npos) return std::string{};
      return str.substr(b, str.find_last_not_of(ws) - b + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw UserError(path + ":" + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    auto fail = [&](const char* why) {
      throw UserError(path + ":" + std::to_string(line_no) + ": " + why + " for '" + key + "'");
    };
    auto as_int = [&]() {
      auto v = pc::csv::parse_int(value);
      if (!v) fail("integer value required");
      return *v;
    };
    auto as_double = [&]() {
      auto v = pc::csv::parse_double(value);
      if (!v) fail("numeric value required");
      return *v;
    };
    if (key == "top-j") s.top_j = static_cast<int>(as_int());
    else if (key == "reference") s.reference = value;
    else if (key == "window-seconds") s.window_seconds = as_int();
    else if (key == "max-iterations") s.max_iterations = static_cast<int>(as_int());
    else if (key == "grad-tol") s.grad_tol = as_double();
    else if (key == "loglik-tol") s.loglik_tol = as_double();
    else if (key == "beta-bound") s.beta_bound = as_double();
    else if (key == "min-occasions-margin") s.min_occasions_margin = static_cast<int>(as_int());
    else if (key == "workers") s.workers = static_cast<int>(as_int());
    else if (key == "seed") s.seed = as_int();
    else throw UserError(path + ":" + std::to_string(line_no) + ": unknown key '" + key + "'");
  }

  auto require = [&](bool ok, const char* what) {
    if (!ok) throw UserError(path + ": " + what);
  };
  require(s.top_j >= 2, "top-j must be at least 2");
  require(s.window_seconds > 0, "window-seconds must be positive");
  require(s.max_iterations >= 1, "max-iterations must be at least 1");
  require(s.grad_tol > 0.0, "grad-tol must be positive");
  require(s.loglik_tol >= 0.0, "loglik-tol must be non-negative");
  require(s.beta_bound > 0.0, "beta-bound must be positive");
  require(s.min_occasions_margin >= 0, "min-occasions-margin must be non-negative");
  require(s.workers >= 0, "workers must be non-negative");
}

pc::FitConfig fit_config(const Settings& s) {
  pc::FitConfig cfg;
  cfg.max_iterations = s.max_iterations;
  cfg.grad_tol = s.grad_tol;
  cfg.loglik_tol = s.loglik_tol;
  cfg.beta_bound = s.beta_bound;
  cfg.min_occasions_margin = s.min_occasions_margin;
  return cfg;
}

int effective_workers(int workers) {
  if (workers > 0) return workers;
  const unsigned hc = std::thread::hardware_concurrency();
  return hc > 0 ? static_cast<int>(hc) : 1;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UserError("cannot open output file: " + path);
  return out;
}

void report_row_errors(const pc::ParseResult& parsed) {
  for (const auto& e : parsed.errors)
    std::cerr << "line:" << e.line << ' ' << e.reason << '\n';
}

pc::ParseResult ingest_checked(const std::string& path, bool strict) {
  pc::ParseResult parsed;
  try {
    parsed = pc::parse_visits_file(path);
  } catch (const pc::SchemaError& e) {
    throw UserError(path + ": " + e.what());
  }
  report_row_errors(parsed);
  if (strict && !parsed.errors.empty())
    throw UserError(path + ": " + std::to_string(parsed.errors.size()) +
                    " malformed row(s) in strict mode");
  return parsed;
}

// ---- stages ---------------------------------------------------------------

void run_ingest(const std::string& input, const std::string& output, bool strict) {
  auto parsed = ingest_checked(input, strict);
  auto panels = pc::build_panels(std::move(parsed.records));
  std::size_t n_visits = 0;
  for (const auto& p : panels) n_visits += p.visits.size();
  if (output.empty()) {
    pc::write_visits(std::cout, panels);
  } else {
    auto out = open_output(output);
    pc::write_visits(out, panels);
  }
  std::cerr << "ingest: " << n_visits << " visits, " << panels.size()
            << " households, " << parsed.errors.size() << " row errors\n";
}

void run_features(const Settings& s, const std::string& input, bool strict,
                  const std::string& occasions_out, const std::string& market_out,
                  const std::string& aggregates_out) {
  auto parsed = ingest_checked(input, strict);
  std::optional<std::string> reference;
  if (!s.reference.empty()) reference = s.reference;
  pc::MarketDefinition market;
  try {
    market = pc::select_market(parsed.records, static_cast<std::size_t>(s.top_j), reference);
  } catch (const std::invalid_argument& e) {
    throw UserError(e.what());
  }
  const std::unordered_set<std::string> market_set(market.alternatives.begin(),
                                                   market.alternatives.end());
  auto panels = pc::build_panels(std::move(parsed.records));

  std::vector<pc::HouseholdOccasions> households;
  std::vector<pc::HouseholdAggregates> aggregates;
  std::size_t excluded = 0, single_alternative = 0;
  for (const auto& panel : panels) {
    const auto flags = pc::detect_repeated_searches(panel, s.window_seconds, market_set);
    const auto set = pc::household_choice_set(panel, market);
    if (set.alternatives.empty()) {
      ++excluded;  // no market visits at all
      continue;
    }
    if (!set.estimable) ++single_alternative;
    households.push_back(pc::build_occasions(panel, set.alternatives, flags));
    aggregates.push_back(pc::household_aggregates(panel, market.alternatives, flags));
  }

  {
    auto out = open_output(occasions_out);
    pc::write_occasions(out, households);
  }
  if (!market_out.empty()) {
    auto out = open_output(market_out);
    pc::write_market(out, market);
  }
  if (!aggregates_out.empty()) {
    auto out = open_output(aggregates_out);
    pc::write_aggregates(out, market.alternatives, aggregates);
  }
  std::cerr << "features: " << households.size() << " households ("
            << single_alternative << " single-alternative), " << excluded
            << " with no market visits, reference " << market.reference_site()
            << '\n';
}

void run_fit(const Settings& s, const std::string& occasions_path,
             const std::string& market_path, const std::string& output,
             const std::string& skipped_out) {
  const auto market = pc::read_market_file(market_path);
  const auto households = pc::read_occasions_file(occasions_path);
  const std::unordered_set<std::string> market_set(market.alternatives.begin(),
                                                   market.alternatives.end());
  std::vector<pc::HouseholdDesign> designs;
  designs.reserve(households.size());
  for (const auto& hh : households) {
    for (const auto& site : hh.choice_set)
      if (!market_set.count(site))
        throw UserError(occasions_path + ": household " + hh.household_id +
                        " references site '" + site + "' outside the market file");
    designs.push_back(pc::assemble_design(hh, market));
  }

  const int workers = effective_workers(s.workers);
  const auto result = pc::run_batch(designs, fit_config(s), workers);
  {
    auto out = open_output(output);
    pc::write_fits_csv(out, result.fits);
  }
  if (!skipped_out.empty()) {
    auto out = open_output(skipped_out);
    pc::write_skipped_csv(out, result.skipped);
  }
  std::size_t dropped = 0, converged = 0;
  for (const auto& fit : result.fits) {
    dropped += static_cast<std::size_t>(fit.dropped_occasions);
    converged += fit.converged ? 1 : 0;
  }
  if (dropped > 0)
    std::cerr << "fit: warning: dropped " << dropped << " single-alternative occasion(s)\n";
  std::cerr << "fit: " << result.fits.size() << " fitted (" << converged
            << " converged), " << result.skipped.size() << " skipped, " << workers
            << " workers, " << result.wall_seconds << " s ("
            << result.households_per_second << " households/s)\n";
}

void run_summarize(const Settings& s, const std::string& fits_path,
                   const std::string& out_path) {
  const auto fits = pc::read_fits_csv_file(fits_path);
  pc::SummaryResult summary;
  try {
    summary = pc::summarize_coefficients(fits, s.beta_bound);
  } catch (const std::invalid_argument& e) {
    throw UserError(fits_path + ": " + e.what());
  }
  for (const auto& w : summary.warnings) std::cerr << "summarize: warning: " << w << '\n';
  auto out = open_output(out_path);
  pc::write_summary_csv(out, summary);
}

void run_correlate(const Settings& s, const std::string& fits_path,
                   const std::string& aggregates_path, const std::string& out_path) {
  pc::CorrelationInput input;
  if (!fits_path.empty()) {
    const auto fits = pc::read_fits_csv_file(fits_path);
    input = pc::coefficient_vectors(fits, s.beta_bound);
  } else {
    std::ifstream in(aggregates_path);
    if (!in) throw UserError("cannot open aggregates file: " + aggregates_path);
    input = pc::aggregates_correlation_input(in);
  }
  const auto matrix = pc::correlate(input);
  auto out = open_output(out_path);
  pc::write_correlation_csv(out, matrix);
}

void run_scatter(const Settings& s, const std::string& fits_path,
                 const std::string& var_x, const std::string& var_y,
                 const std::string& svg_path, const std::string& points_path) {
  const auto fits = pc::read_fits_csv_file(fits_path);
  pc::ScatterData data;
  try {
    data = pc::scatter_data(fits, var_x, var_y, s.beta_bound);
  } catch (const std::invalid_argument& e) {
    throw UserError(e.what());
  }
  {
    auto out = open_output(svg_path);
    pc::write_scatter_svg(out, data);
  }
  if (!points_path.empty()) {
    auto out = open_output(points_path);
    pc::write_scatter_points(out, data);
  }
  std::cerr << "scatter: " << data.x.size() << " points\n";
}

void run_simulate(const Settings& s, const std::string& spec_path,
                  const std::string& visits_out, const std::string& truth_out,
                  const std::string& covariates_out) {
  pc::GeneratorSpec spec;
  try {
    spec = pc::parse_generator_spec_file(spec_path);
  } catch (const std::runtime_error& e) {
    throw UserError(e.what());
  }
  if (s.seed >= 0) spec.seed = static_cast<std::uint64_t>(s.seed);
  const auto sim = pc::simulate_panel(spec);
  {
    auto out = open_output(visits_out);
    pc::write_visits(out, sim.visits);
  }
  {
    auto out = open_output(truth_out);
    pc::write_truth_csv(out, sim.truth);
  }
  if (!covariates_out.empty()) {
    auto out = open_output(covariates_out);
    pc::write_occasions(out, sim.generated);
  }
  std::cerr << "simulate: " << sim.visits.size() << " visits, "
            << sim.truth.size() << " households\n";
}

void run_pipeline(const Settings& s, const std::string& input,
                  const std::string& out_dir, bool strict) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw UserError("cannot create output directory: " + out_dir);
  auto path = [&](const char* name) { return (fs::path(out_dir) / name).string(); };

  run_features(s, input, strict, path("occasions.csv"), path("market.csv"),
               path("aggregates.csv"));
  run_fit(s, path("occasions.csv"), path("market.csv"), path("fits.csv"),
          path("skipped.csv"));
  run_summarize(s, path("fits.csv"), path("table3.csv"));
  run_correlate(s, path("fits.csv"), "", path("table4.csv"));
  run_correlate(s, "", path("aggregates.csv"), path("table2.csv"));
}

}  // namespace

int main(int argc, char** argv) {
  Settings settings;

  // The config file seeds the option defaults, so explicit flags win.
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    try {
      if (arg == "--config" && i + 1 < argc) {
        apply_config_file(argv[i + 1], settings);
      } else if (arg.rfind("--config=", 0) == 0) {
        apply_config_file(arg.substr(9), settings);
      }
    } catch (const UserError& e) {
      std::cerr << "error: " << e.what() << '\n';
      return 1;
    }
  }

  CLI::App app{"Per-household conditional-logit models of portal choice from "
               "clickstream visit logs"};
  app.set_version_flag("--version", pc::kVersion);
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "key = value configuration file")
      ->check(CLI::ExistingFile);

  std::string input, output, occasions_path, market_path, fits_path,
      aggregates_path, skipped_out, market_out, aggregates_out, spec_path,
      truth_out, covariates_out, points_path, var_x, var_y, out_dir;
  bool strict = false;

  auto add_optimizer_flags = [&](CLI::App* cmd) {
    cmd->add_option("--max-iterations", settings.max_iterations, "Newton iteration cap")
        ->capture_default_str();
    cmd->add_option("--grad-tol", settings.grad_tol, "gradient infinity-norm tolerance")
        ->capture_default_str();
    cmd->add_option("--loglik-tol", settings.loglik_tol,
                    "relative log-likelihood change tolerance")
        ->capture_default_str();
    cmd->add_option("--beta-bound", settings.beta_bound, "hard clamp on |coefficient|")
        ->capture_default_str();
    cmd->add_option("--min-occasions-margin", settings.min_occasions_margin,
                    "estimable needs occasions >= p + margin")
        ->capture_default_str();
  };
  auto add_market_flags = [&](CLI::App* cmd) {
    cmd->add_option("--top-j", settings.top_j, "market size: global top-J sites")
        ->capture_default_str();
    cmd->add_option("--reference", settings.reference,
                    "reference site (default: most visited)");
    cmd->add_option("--window-seconds", settings.window_seconds,
                    "repeated-search window")
        ->capture_default_str();
  };

  auto* c_ingest = app.add_subcommand("ingest", "validate and canonicalize a visit log");
  c_ingest->add_option("--input", input, "visits csv")->required();
  c_ingest->add_option("--output", output, "canonical visits csv (default: stdout)");
  c_ingest->add_flag("--strict", strict, "treat malformed rows as fatal");
  c_ingest->callback([&] { run_ingest(input, output, strict); });

  auto* c_features = app.add_subcommand(
      "features", "build per-occasion covariates, market and aggregates");
  c_features->add_option("--input", input, "visits csv")->required();
  c_features->add_option("--output", occasions_path, "occasions csv")->required();
  c_features->add_option("--market-out", market_out, "market csv");
  c_features->add_option("--aggregates-out", aggregates_out, "household aggregates csv");
  c_features->add_flag("--strict", strict, "treat malformed rows as fatal");
  add_market_flags(c_features);
  c_features->callback([&] {
    run_features(settings, input, strict, occasions_path, market_out, aggregates_out);
  });

  auto* c_fit = app.add_subcommand("fit", "estimate one conditional logit per household");
  c_fit->add_option("--occasions", occasions_path, "occasions csv")->required();
  c_fit->add_option("--market", market_path, "market csv")->required();
  c_fit->add_option("--workers", settings.workers,
                    "worker threads (0: hardware concurrency)")
      ->capture_default_str();
  c_fit->add_option("--output", output, "fits csv")->required();
  c_fit->add_option("--skipped-out", skipped_out, "skipped households csv");
  add_optimizer_flags(c_fit);
  c_fit->callback([&] {
    run_fit(settings, occasions_path, market_path, output, skipped_out);
  });

  auto* c_summarize = app.add_subcommand(
      "summarize", "cross-household coefficient summary table");
  c_summarize->add_option("--fits", fits_path, "fits csv")->required();
  c_summarize->add_option("--out", output, "summary csv")->required();
  c_summarize->add_option("--beta-bound", settings.beta_bound,
                          "divergence threshold on |coefficient|")
      ->capture_default_str();
  c_summarize->callback([&] { run_summarize(settings, fits_path, output); });

  auto* c_correlate = app.add_subcommand(
      "correlate", "pairwise correlation matrix with significance marks");
  auto* opt_fits = c_correlate->add_option("--fits", fits_path, "fits csv");
  auto* opt_agg = c_correlate->add_option("--aggregates", aggregates_path,
                                          "household aggregates csv");
  opt_fits->excludes(opt_agg);
  c_correlate->add_option("--out", output, "matrix csv")->required();
  c_correlate->add_option("--beta-bound", settings.beta_bound,
                          "divergence threshold on |coefficient|")
      ->capture_default_str();
  c_correlate->callback([&] {
    if (fits_path.empty() == aggregates_path.empty())
      throw UserError("correlate needs exactly one of --fits or --aggregates");
    run_correlate(settings, fits_path, aggregates_path, output);
  });

  auto* c_scatter = app.add_subcommand("scatter",
                                       "coefficient scatterplot for two variables");
  c_scatter->add_option("--fits", fits_path, "fits csv")->required();
  c_scatter->add_option("--x", var_x, "x variable")->required();
  c_scatter->add_option("--y", var_y, "y variable")->required();
  c_scatter->add_option("--out", output, "svg file")->required();
  c_scatter->add_option("--points", points_path, "points csv")->required();
  c_scatter->add_option("--beta-bound", settings.beta_bound,
                        "divergence threshold on |coefficient|")
      ->capture_default_str();
  c_scatter->callback([&] {
    run_scatter(settings, fits_path, var_x, var_y, output, points_path);
  });

  auto* c_simulate = app.add_subcommand(
      "simulate", "generate a synthetic visit log with known coefficients");
  c_simulate->add_option("--spec", spec_path, "generator spec (key = value)")->required();
  c_simulate->add_option("--out", output, "visits csv")->required();
  c_simulate->add_option("--truth", truth_out, "true coefficients csv")->required();
  c_simulate->add_option("--covariates-out", covariates_out,
                         "generation-time covariates (debug)");
  c_simulate->add_option("--seed", settings.seed, "override the spec seed");
  c_simulate->callback([&] {
    run_simulate(settings, spec_path, output, truth_out, covariates_out);
  });

  auto* c_pipeline = app.add_subcommand(
      "pipeline", "ingest, features, fit, summarize and correlate in one run");
  c_pipeline->add_option("--input", input, "visits csv")->required();
  c_pipeline->add_option("--out-dir", out_dir, "output directory")->required();
  c_pipeline->add_flag("--strict", strict, "treat malformed rows as fatal");
  c_pipeline->add_option("--workers", settings.workers,
                         "worker threads (0: hardware concurrency)")
      ->capture_default_str();
  add_market_flags(c_pipeline);
  add_optimizer_flags(c_pipeline);
  c_pipeline->callback([&] { run_pipeline(settings, input, out_dir, strict); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\nRun with --help for usage.\n";
    return 1;
  } catch (const UserError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::runtime_error& e) {
    // library readers throw runtime_error for unopenable or malformed inputs
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
