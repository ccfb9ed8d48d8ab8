#include <benchmark/benchmark.h>

#include "feedaudit/iid_tester.hpp"
#include "feedaudit/markov_chain.hpp"
#include "feedaudit/platform_sim.hpp"
#include "feedaudit/regulatory_tester.hpp"

using namespace feedaudit;

namespace {

MarkovChain uniform_chain(std::size_t n) {
    return validate_chain(std::vector<std::vector<double>>(n, std::vector<double>(n, 1.0 / static_cast<double>(n))));
}

void BM_SimulateTrajectory(benchmark::State& state) {
    const auto chain = uniform_chain(static_cast<std::size_t>(state.range(0)));
    std::uint64_t seed = 0;
    for (auto _ : state) benchmark::DoNotOptimize(simulate_trajectory(chain, 0, 100'000, seed++));
    state.SetItemsProcessed(state.iterations() * 100'000);
}
BENCHMARK(BM_SimulateTrajectory)->Arg(2)->Arg(10)->Arg(50);

void BM_GStatistic(benchmark::State& state) {
    const auto point = make_uniform_point(10, static_cast<std::size_t>(state.range(0)), 0.5, 0.1, 0.5);
    IIDTestConfig config;
    config.pairs = point.pairs;
    config.alphabet = 10;
    config.m = 500;
    config.poissonize = false;
    std::vector<SampleSet> p(point.pairs), q(point.pairs);
    Rng rng = make_rng(1);
    for (std::size_t u = 0; u < point.pairs; ++u) {
        for (auto* set : {&p[u], &q[u]}) {
            const auto cum = prefix_sums(set == &p[u] ? point.p[u] : point.q[u]);
            for (int i = 0; i < 500; ++i) {
                set->first_half.push_back(sample_cumulative(cum, rng));
                set->second_half.push_back(sample_cumulative(cum, rng));
            }
        }
    }
    for (auto _ : state) benchmark::DoNotOptimize(iid_tester(p, q, config, 7));
}
BENCHMARK(BM_GStatistic)->Arg(1)->Arg(4)->Arg(16);

void BM_CoverTime(benchmark::State& state) {
    const auto chain = uniform_chain(10);
    CoverTimeOptions options;
    options.threads = 1;
    for (auto _ : state) {
        benchmark::DoNotOptimize(estimate_cover_time(chain, 4, static_cast<std::uint64_t>(state.range(0)), 100, 3, options));
    }
}
BENCHMARK(BM_CoverTime)->Arg(1)->Arg(16)->Arg(256);

void BM_RegulatoryTester(benchmark::State& state) {
    ScenarioSpec spec;
    spec.states = static_cast<std::size_t>(state.range(0));
    spec.users = 4;
    spec.gaps.assign(4, 0.0);
    const auto scenario = make_scenario(spec, 1);
    const auto feeds = generate_feeds(scenario, 4, 20'000, 2);
    RegulatoryConfig config;
    config.states = spec.states;
    config.successor_budget = 400;
    config.early_exit = false;
    for (auto _ : state) benchmark::DoNotOptimize(regulatory_tester(feeds.filtered, feeds.reference, config));
}
BENCHMARK(BM_RegulatoryTester)->Arg(2)->Arg(10);

}  // namespace

BENCHMARK_MAIN();
