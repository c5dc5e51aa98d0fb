#include "portalchoice/synth.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <random>
#include <stdexcept>

#include "portalchoice/csv.hpp"
#include "portalchoice/choice_set.hpp"
#include "portalchoice/logit.hpp"

namespace portalchoice {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Hand-rolled samplers; std distributions vary across library versions.
double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double standard_normal(std::mt19937_64& rng) {
  double u;
  do {
    u = uniform01(rng);
  } while (u <= 0.0);
  const double v = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u)) * std::cos(2.0 * std::numbers::pi * v);
}

int categorical(std::mt19937_64& rng, const Eigen::VectorXd& prob) {
  const double u = uniform01(rng);
  double cum = 0.0;
  for (Eigen::Index k = 0; k < prob.size(); ++k) {
    cum += prob(k);
    if (u < cum) return static_cast<int>(k);
  }
  return static_cast<int>(prob.size() - 1);
}

std::string padded_name(const char* prefix, std::size_t index, std::size_t total) {
  std::size_t width = std::to_string(total).size();
  std::string digits = std::to_string(index);
  if (digits.size() < width) digits.insert(0, width - digits.size(), '0');
  return prefix + digits;
}

constexpr std::int64_t kVisitDuration = 60;
constexpr std::int64_t kNormalSpacing = 600;  // start-to-start
constexpr std::int64_t kRepeatGap = 120;      // end-to-start, under the 300 s rule

}  // namespace

GeneratorSpec parse_generator_spec(std::istream& in) {
  GeneratorSpec spec;
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& why) {
    throw std::runtime_error("generator spec line " + std::to_string(line_no) + ": " + why);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto trim = [](std::string s) {
      const char* ws = " \t";
      const auto b = s.find_first_not_of(ws);
      if (b == std::string::npos) return std::string{};
      const auto e = s.find_last_not_of(ws);
      return s.substr(b, e - b + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) fail("expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));

    auto as_int = [&]() {
      auto v = csv::parse_int(value);
      if (!v) fail("non-integer value for " + key);
      return *v;
    };
    auto as_double = [&]() {
      auto v = csv::parse_double(value);
      if (!v) fail("non-numeric value for " + key);
      return *v;
    };

    if (key == "n_households") spec.n_households = static_cast<std::size_t>(as_int());
    else if (key == "occasions_min") spec.occasions_min = static_cast<int>(as_int());
    else if (key == "occasions_max") spec.occasions_max = static_cast<int>(as_int());
    else if (key == "n_alternatives") spec.n_alternatives = static_cast<std::size_t>(as_int());
    else if (key == "seed") spec.seed = static_cast<std::uint64_t>(as_int());
    else if (key == "loyalty_mean") spec.loyalty_mean = as_double();
    else if (key == "loyalty_sd") spec.loyalty_sd = as_double();
    else if (key == "repeated_mean") spec.repeated_mean = as_double();
    else if (key == "repeated_sd") spec.repeated_sd = as_double();
    else if (key == "ln_pages_mean") spec.ln_pages_mean = as_double();
    else if (key == "ln_pages_sd") spec.ln_pages_sd = as_double();
    else if (key == "missing_mean") spec.missing_mean = as_double();
    else if (key == "missing_sd") spec.missing_sd = as_double();
    else if (key == "dummy_mean") spec.dummy_mean = as_double();
    else if (key == "dummy_sd") spec.dummy_sd = as_double();
    else if (key == "pages_mu") spec.pages_mu = as_double();
    else if (key == "pages_sigma") spec.pages_sigma = as_double();
    else if (key == "repeat_prob") spec.repeat_prob = as_double();
    else fail("unknown key '" + key + "'");
  }

  if (spec.n_households == 0) throw std::runtime_error("generator spec: n_households must be > 0");
  if (spec.n_alternatives < 2) throw std::runtime_error("generator spec: n_alternatives must be >= 2");
  if (spec.occasions_min < 1 || spec.occasions_max < spec.occasions_min)
    throw std::runtime_error("generator spec: bad occasions range");
  if (spec.repeat_prob < 0.0 || spec.repeat_prob > 1.0)
    throw std::runtime_error("generator spec: repeat_prob must be in [0,1]");
  for (double sd : {spec.loyalty_sd, spec.repeated_sd, spec.ln_pages_sd, spec.missing_sd,
                    spec.dummy_sd, spec.pages_sigma})
    if (sd < 0.0) throw std::runtime_error("generator spec: negative standard deviation");
  return spec;
}

GeneratorSpec parse_generator_spec_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open generator spec: " + path);
  return parse_generator_spec(in);
}

SimulationResult simulate_panel(const GeneratorSpec& spec) {
  const std::size_t J = spec.n_alternatives;
  SimulationResult result;
  result.market_sites.reserve(J);
  for (std::size_t k = 0; k < J; ++k)
    result.market_sites.push_back(padded_name("p", k + 1, J));

  const std::vector<std::string>& sites = result.market_sites;
  std::vector<std::string> truth_vars(kCovariateNames.begin(), kCovariateNames.end());
  for (std::size_t k = 1; k < J; ++k) truth_vars.push_back(dummy_name(sites[k]));

  for (std::size_t h = 0; h < spec.n_households; ++h) {
    std::mt19937_64 rng(splitmix64(spec.seed + h));
    const std::string household = padded_name("h", h + 1, spec.n_households);

    int T = spec.occasions_min;
    if (spec.occasions_max > spec.occasions_min) {
      const auto span =
          static_cast<std::uint64_t>(spec.occasions_max - spec.occasions_min + 1);
      T = spec.occasions_min + static_cast<int>(rng() % span);
    }

    // True coefficients: [loyalty, repeated, ln_pages, missing, dummies 2..J]
    Eigen::VectorXd beta(4 + static_cast<Eigen::Index>(J) - 1);
    beta(0) = spec.loyalty_mean + spec.loyalty_sd * standard_normal(rng);
    beta(1) = spec.repeated_mean + spec.repeated_sd * standard_normal(rng);
    beta(2) = spec.ln_pages_mean + spec.ln_pages_sd * standard_normal(rng);
    beta(3) = spec.missing_mean + spec.missing_sd * standard_normal(rng);
    for (std::size_t k = 1; k < J; ++k)
      beta(3 + static_cast<Eigen::Index>(k)) =
          spec.dummy_mean + spec.dummy_sd * standard_normal(rng);

    TrueCoefficients truth;
    truth.household_id = household;
    truth.variables = truth_vars;
    truth.values.assign(beta.data(), beta.data() + beta.size());
    result.truth.push_back(std::move(truth));

    HouseholdOccasions gen;
    gen.household_id = household;
    gen.choice_set = sites;

    std::vector<char> seen(J, 0);
    std::vector<std::int64_t> last_pages(J, 0);
    std::vector<int> last_flag(J, 0);
    int prev_chosen = -1;
    std::int64_t start = 1'000'000;

    for (int t = 1; t <= T; ++t) {
      ChoiceOccasion occ;
      occ.index = t;
      occ.covariates.resize(J);
      Eigen::VectorXd utilities(static_cast<Eigen::Index>(J));
      for (std::size_t k = 0; k < J; ++k) {
        AlternativeCovariates& c = occ.covariates[k];
        if (!seen[k]) {
          c.missing_data = 1.0;
        } else {
          c.loyalty = (static_cast<int>(k) == prev_chosen) ? 1.0 : 0.0;
          c.last_search_repeated = static_cast<double>(last_flag[k]);
          c.ln_last_pages =
              std::log(static_cast<double>(std::max<std::int64_t>(last_pages[k], 1)));
        }
        double u = beta(0) * c.loyalty + beta(1) * c.last_search_repeated +
                   beta(2) * c.ln_last_pages + beta(3) * c.missing_data;
        if (k > 0) u += beta(3 + static_cast<Eigen::Index>(k));
        utilities(static_cast<Eigen::Index>(k)) = u;
      }
      const int chosen = categorical(rng, softmax_utilities(utilities));
      occ.chosen = chosen;

      const auto pages = static_cast<std::int64_t>(std::max<long long>(
          1, std::llround(std::exp(spec.pages_mu + spec.pages_sigma * standard_normal(rng)))));
      const bool repeat = uniform01(rng) < spec.repeat_prob;

      result.visits.push_back({household, sites[static_cast<std::size_t>(chosen)],
                               start, start + kVisitDuration, pages, std::nullopt});
      gen.occasions.push_back(std::move(occ));

      seen[static_cast<std::size_t>(chosen)] = 1;
      last_pages[static_cast<std::size_t>(chosen)] = pages;
      // The flag of the final visit is never observed downstream: with no
      // following visit the five-minute rule cannot fire.
      last_flag[static_cast<std::size_t>(chosen)] = (repeat && t < T) ? 1 : 0;
      prev_chosen = chosen;

      start = repeat ? start + kVisitDuration + kRepeatGap : start + kNormalSpacing;
    }
    result.generated.push_back(std::move(gen));
  }
  return result;
}

void write_truth_csv(std::ostream& out, const std::vector<TrueCoefficients>& truth) {
  out << "household_id,variable,value\n";
  for (const auto& t : truth)
    for (std::size_t k = 0; k < t.variables.size(); ++k)
      out << t.household_id << ',' << t.variables[k] << ','
          << csv::format_double(t.values[k]) << '\n';
}

std::vector<TrueCoefficients> read_truth_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open truth file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("truth file: no header");
  std::vector<TrueCoefficients> out;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    auto f = csv::split(line);
    if (f.size() != 3) throw std::runtime_error("truth file: expected 3 fields");
    auto v = csv::parse_double(f[2]);
    if (!v) throw std::runtime_error("truth file: malformed value");
    if (out.empty() || out.back().household_id != f[0]) {
      out.push_back({f[0], {}, {}});
    }
    out.back().variables.push_back(f[1]);
    out.back().values.push_back(*v);
  }
  return out;
}

}  // namespace portalchoice
