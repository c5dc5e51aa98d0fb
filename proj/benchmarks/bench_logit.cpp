#include <benchmark/benchmark.h>

#include <random>

#include "portalchoice/batch.hpp"
#include "portalchoice/logit.hpp"

using namespace portalchoice;

namespace {

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
}

// T occasions of J alternatives with p columns, paper-scale by default.
HouseholdDesign make_household(int T, int n_alts, int p, std::uint64_t seed,
                               const std::string& id = "h1") {
  std::mt19937_64 rng(seed);
  HouseholdDesign hh;
  hh.household_id = id;
  for (int k = 0; k < n_alts; ++k) hh.choice_set.push_back("a" + std::to_string(k));
  for (int c = 0; c < p; ++c) hh.layout.push_back("x" + std::to_string(c));
  for (int t = 0; t < T; ++t) {
    OccasionDesign occ;
    occ.x = Eigen::MatrixXd(n_alts, p);
    for (int k = 0; k < n_alts; ++k)
      for (int c = 0; c < p; ++c) occ.x(k, c) = uniform(rng, -2.0, 2.0);
    occ.chosen = static_cast<int>(rng() % static_cast<std::uint64_t>(n_alts));
    hh.occasions.push_back(std::move(occ));
  }
  return hh;
}

void BM_Softmax(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const auto n = static_cast<Eigen::Index>(state.range(0));
  Eigen::VectorXd u(n);
  for (Eigen::Index k = 0; k < n; ++k) u(k) = uniform(rng, -30, 30);
  for (auto _ : state) benchmark::DoNotOptimize(softmax_utilities(u));
}
BENCHMARK(BM_Softmax)->Arg(5)->Arg(15);

void BM_LoglikGradHess(benchmark::State& state) {
  const auto hh = make_household(static_cast<int>(state.range(0)), 5, 8, 7);
  Eigen::VectorXd beta = Eigen::VectorXd::Constant(8, 0.3);
  for (auto _ : state) benchmark::DoNotOptimize(loglik_grad_hess(beta, hh.occasions));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_LoglikGradHess)->Arg(50)->Arg(300)->Arg(1000);

void BM_FitHousehold(benchmark::State& state) {
  const auto hh = make_household(static_cast<int>(state.range(0)), 5, 8, 11);
  const FitConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(fit_household(hh, cfg));
}
BENCHMARK(BM_FitHousehold)->Arg(100)->Arg(300);

void BM_RunBatch(benchmark::State& state) {
  std::vector<HouseholdDesign> households;
  for (int i = 0; i < 64; ++i)
    households.push_back(make_household(300, 5, 8, 100 + static_cast<std::uint64_t>(i),
                                        "h" + std::to_string(i)));
  const FitConfig cfg;
  const int workers = static_cast<int>(state.range(0));
  for (auto _ : state) {
    auto result = run_batch(households, cfg, workers);
    benchmark::DoNotOptimize(result);
  }
  state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_RunBatch)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
