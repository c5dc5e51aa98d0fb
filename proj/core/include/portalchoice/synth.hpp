#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "portalchoice/features.hpp"
#include "portalchoice/ingest.hpp"

namespace portalchoice {

// Generator for synthetic clickstream panels with known per-household
// coefficients. Coefficient k of household i is drawn Normal(mean_k, sd_k);
// the first alternative is the base (no dummy).
struct GeneratorSpec {
  std::size_t n_households = 100;
  int occasions_min = 50;
  int occasions_max = 50;
  std::size_t n_alternatives = 3;
  std::uint64_t seed = 1;

  double loyalty_mean = 0.8, loyalty_sd = 0.5;
  double repeated_mean = -0.4, repeated_sd = 0.3;
  double ln_pages_mean = 0.2, ln_pages_sd = 0.3;
  double missing_mean = -0.5, missing_sd = 0.4;
  double dummy_mean = -0.8, dummy_sd = 0.6;

  // pages per visit: max(1, round(exp(Normal(pages_mu, pages_sigma))))
  double pages_mu = 1.2;
  double pages_sigma = 0.8;

  // probability a visit's search fails and is repeated; realized by placing
  // the next visit 120 s after this one ends (normal spacing is 600 s
  // start-to-start) so the five-minute rule recovers the flag exactly
  double repeat_prob = 0.3;
};

// key = value lines, '#' comments; unknown keys rejected.
GeneratorSpec parse_generator_spec(std::istream& in);
GeneratorSpec parse_generator_spec_file(const std::string& path);

struct TrueCoefficients {
  std::string household_id;
  std::vector<std::string> variables;
  std::vector<double> values;
};

struct SimulationResult {
  std::vector<VisitRecord> visits;            // household-major, time-ordered
  std::vector<TrueCoefficients> truth;
  std::vector<HouseholdOccasions> generated;  // generation-time covariates
  std::vector<std::string> market_sites;      // base first
};

// Deterministic in the spec: per-household RNG streams are derived from the
// master seed, so output is byte-identical across runs and schedules.
SimulationResult simulate_panel(const GeneratorSpec& spec);

// household_id,variable,value
void write_truth_csv(std::ostream& out, const std::vector<TrueCoefficients>& truth);
std::vector<TrueCoefficients> read_truth_csv_file(const std::string& path);

}  // namespace portalchoice
