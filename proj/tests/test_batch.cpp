#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <sstream>

#include "oracles.hpp"
#include "portalchoice/batch.hpp"

using namespace portalchoice;

namespace {

HouseholdDesign design_from(std::vector<OccasionDesign> occasions, int n_alts, int p,
                            const std::string& id) {
  HouseholdDesign hh;
  hh.household_id = id;
  for (int k = 0; k < n_alts; ++k) hh.choice_set.push_back("a" + std::to_string(k));
  for (int c = 0; c < p; ++c) hh.layout.push_back("x" + std::to_string(c));
  hh.occasions = std::move(occasions);
  return hh;
}

std::vector<HouseholdDesign> random_households(std::mt19937_64& rng, int n) {
  std::vector<HouseholdDesign> out;
  for (int i = 0; i < n; ++i) {
    const int n_alts = 2 + static_cast<int>(rng() % 3);
    const int p = 2 + static_cast<int>(rng() % 3);
    const int T = 40 + static_cast<int>(rng() % 60);
    auto inst = oracle::random_instance(rng, n_alts, p, T, 0.7);
    char id[16];
    std::snprintf(id, sizeof(id), "h%03d", i);
    out.push_back(design_from(std::move(inst.occasions), n_alts, p, id));
  }
  return out;
}

}  // namespace

TEST_CASE("every household is fitted or skipped, exactly once") {
  std::mt19937_64 rng(31);
  auto households = random_households(rng, 12);

  // one household with a single alternative, one with too few occasions
  Eigen::MatrixXd solo(1, 1);
  solo << 0;
  HouseholdDesign single;
  single.household_id = "h_single";
  single.choice_set = {"a0"};
  single.layout = {"x0"};
  for (int i = 0; i < 10; ++i) single.occasions.push_back({solo, 0});
  households.push_back(single);

  Eigen::MatrixXd pair_x(2, 1);
  pair_x << 0, 1;
  HouseholdDesign thin;
  thin.household_id = "h_thin";
  thin.choice_set = {"a0", "a1"};
  thin.layout = {"x0"};
  thin.occasions.push_back({pair_x, 0});
  households.push_back(thin);

  FitConfig cfg;
  auto result = run_batch(households, cfg, 3);
  CHECK(result.fits.size() + result.skipped.size() == households.size());
  CHECK(result.households_per_second > 0.0);

  bool saw_single = false, saw_thin = false;
  for (const auto& [id, reason] : result.skipped) {
    if (id == "h_single") {
      saw_single = true;
      CHECK(reason == "non_estimable");
    }
    if (id == "h_thin") {
      saw_thin = true;
      CHECK(reason == "too_few_occasions");
    }
  }
  CHECK(saw_single);
  CHECK(saw_thin);
}

TEST_CASE("output is sorted by household id whatever the input order") {
  std::mt19937_64 rng(32);
  auto households = random_households(rng, 8);
  std::shuffle(households.begin(), households.end(), rng);
  FitConfig cfg;
  auto result = run_batch(households, cfg, 2);
  for (std::size_t i = 1; i < result.fits.size(); ++i)
    CHECK(result.fits[i - 1].household_id < result.fits[i].household_id);
}

TEST_CASE("serial and parallel runs write byte-identical fits") {
  std::mt19937_64 rng(33);
  auto households = random_households(rng, 20);
  FitConfig cfg;

  std::string serial, parallel;
  {
    auto result = run_batch(households, cfg, 1);
    std::ostringstream out;
    write_fits_csv(out, result.fits);
    serial = out.str();
  }
  for (int workers : {2, 4, 7}) {
    auto result = run_batch(households, cfg, workers);
    std::ostringstream out;
    write_fits_csv(out, result.fits);
    parallel = out.str();
    CHECK(serial == parallel);
  }
}

TEST_CASE("a broken household is skipped, not fatal") {
  std::mt19937_64 rng(34);
  auto households = random_households(rng, 4);
  // ragged design: occasion column count disagrees with the layout
  HouseholdDesign broken;
  broken.household_id = "h_broken";
  broken.choice_set = {"a0", "a1"};
  broken.layout = {"x0", "x1"};
  Eigen::MatrixXd bad(2, 5);
  bad.setZero();
  for (int i = 0; i < 10; ++i) broken.occasions.push_back({bad, 0});
  households.push_back(broken);

  FitConfig cfg;
  auto result = run_batch(households, cfg, 2);
  CHECK(result.fits.size() == 4);
  REQUIRE(result.skipped.size() == 1);
  CHECK(result.skipped[0].first == "h_broken");
  CHECK(result.skipped[0].second.rfind("error:", 0) == 0);
}

TEST_CASE("all-single-alternative input fits nothing") {
  Eigen::MatrixXd solo(1, 1);
  solo << 0;
  std::vector<HouseholdDesign> households;
  for (int i = 0; i < 3; ++i) {
    HouseholdDesign hh;
    hh.household_id = "h" + std::to_string(i);
    hh.choice_set = {"a0"};
    hh.layout = {"x0"};
    for (int t = 0; t < 8; ++t) hh.occasions.push_back({solo, 0});
    households.push_back(std::move(hh));
  }
  FitConfig cfg;
  auto result = run_batch(households, cfg, 2);
  CHECK(result.fits.empty());
  CHECK(result.skipped.size() == 3);
}

TEST_CASE("non-contiguous household rows are rejected on read") {
  std::istringstream in(
      "household_id,variable,coefficient,se,z,significant,flags,loglik,"
      "iterations,converged\n"
      "h1,x0,1,,,0,,-5,3,1\n"
      "h2,x0,2,,,0,,-5,3,1\n"
      "h1,x1,3,,,0,,-5,3,1\n");
  CHECK_THROWS_WITH_AS(read_fits_csv(in), doctest::Contains("contiguous"),
                       std::runtime_error);
}

TEST_CASE("fits survive the csv round trip") {
  std::mt19937_64 rng(35);
  auto households = random_households(rng, 6);
  FitConfig cfg;
  auto result = run_batch(households, cfg, 1);

  std::ostringstream out;
  write_fits_csv(out, result.fits);
  std::istringstream in(out.str());
  auto records = read_fits_csv(in);
  REQUIRE(records.size() == result.fits.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto direct = to_fit_record(result.fits[i]);
    CHECK(records[i].household_id == direct.household_id);
    CHECK(records[i].variables == direct.variables);
    CHECK(records[i].coefficients == direct.coefficients);
    CHECK(records[i].se == direct.se);
    CHECK(records[i].significance == direct.significance);
    CHECK(records[i].flags == direct.flags);
    CHECK(records[i].loglik == direct.loglik);
    CHECK(records[i].converged == direct.converged);
  }
}
