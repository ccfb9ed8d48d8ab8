#include "feedaudit/regulatory_tester.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "feedaudit/error.hpp"
#include "feedaudit/parallel.hpp"

namespace feedaudit {

std::string_view to_string(World w) noexcept { return w == World::Filtered ? "F" : "R"; }

std::string_view to_string(Reason r) noexcept {
    switch (r) {
        case Reason::Coverage: return "Coverage";
        case Reason::Statistic: return "Statistic";
        case Reason::Clean: return "Clean";
    }
    return "Clean";
}

void FeedBatch::validate(std::size_t n) const {
    if (trajectories.empty()) throw Error(ErrorKind::InvalidArgument, "batch for user " + std::to_string(user) + " is empty");
    const std::size_t t = trajectories.front().length();
    if (t == 0) throw Error(ErrorKind::InvalidArgument, "trajectories must be non-empty");
    for (const auto& traj : trajectories) {
        if (traj.length() != t) {
            throw Error(ErrorKind::InvalidArgument, "user " + std::to_string(user) + " has trajectories of unequal length");
        }
        for (State s : traj.states) {
            if (s >= n) throw Error(ErrorKind::InvalidArgument, "state label outside [1.." + std::to_string(n) + "]");
        }
    }
}

FeedBatch simulate_batch(const MarkovChain& chain, std::uint64_t user, World world, std::size_t walks,
                         std::size_t horizon, std::uint64_t seed) {
    const auto pi_cumulative = prefix_sums(stationary_distribution(chain));
    FeedBatch batch;
    batch.user = user;
    batch.world = world;
    batch.trajectories.reserve(walks);
    for (std::size_t j = 0; j < walks; ++j) {
        Rng rng = make_rng(derive_seed(seed, j));
        const State start = sample_cumulative(pi_cumulative, rng);
        batch.trajectories.push_back(simulate_trajectory(chain, start, horizon, rng));
    }
    return batch;
}

std::uint64_t default_successor_budget(std::size_t states, std::size_t users, double eps1, double eps2, double delta,
                                       const SampleBudgetConstants& constants) {
    const double per_state = delta / (2.0 * static_cast<double>(states));
    return 2 * required_m(static_cast<double>(states), users, eps1, eps2, per_state, constants);
}

std::uint64_t RegulatoryConfig::resolved_budget(std::size_t users) const {
    if (successor_budget) return *successor_budget;
    return default_successor_budget(states, users, eps1, eps2, delta, budget);
}

bool coverage_gate(const FeedBatch& batch, State state, std::uint64_t budget) {
    return successor_bearing_visits(batch.trajectories, state) >= budget;
}

namespace {

void check_alignment(std::span<const FeedBatch> filtered, std::span<const FeedBatch> reference, std::size_t n) {
    if (filtered.empty()) throw Error(ErrorKind::ConfigMismatch, "no users supplied");
    if (filtered.size() != reference.size()) {
        throw Error(ErrorKind::ConfigMismatch, std::to_string(filtered.size()) + " filtered batches vs " +
                                                   std::to_string(reference.size()) + " reference batches");
    }
    for (std::size_t u = 0; u < filtered.size(); ++u) {
        if (filtered[u].user != reference[u].user) {
            throw Error(ErrorKind::ConfigMismatch, "user sets disagree at position " + std::to_string(u));
        }
        filtered[u].validate(n);
        reference[u].validate(n);
    }
}

StateReport test_state(std::span<const FeedBatch> filtered, std::span<const FeedBatch> reference, State state,
                       std::uint64_t budget, const RegulatoryConfig& config) {
    const std::size_t users = filtered.size();
    StateReport report;
    report.state = state;
    report.coverage_ok = true;
    for (std::size_t u = 0; u < users; ++u) {
        report.filtered_successors.push_back(successor_bearing_visits(filtered[u].trajectories, state));
        report.reference_successors.push_back(successor_bearing_visits(reference[u].trajectories, state));
        if (report.filtered_successors.back() < budget || report.reference_successors.back() < budget) {
            report.coverage_ok = false;
        }
    }
    if (!report.coverage_ok) return report;

    const std::uint64_t half = budget / 2;
    auto split = [half](std::vector<State> successors) {
        SampleSet set;
        set.first_half.assign(successors.begin(), successors.begin() + static_cast<std::ptrdiff_t>(half));
        set.second_half.assign(successors.begin() + static_cast<std::ptrdiff_t>(half),
                               successors.begin() + static_cast<std::ptrdiff_t>(2 * half));
        return set;
    };
    std::vector<SampleSet> reference_sets, filtered_sets;
    for (std::size_t u = 0; u < users; ++u) {
        reference_sets.push_back(split(extract_successors(reference[u].trajectories, state, 2 * half)));
        filtered_sets.push_back(split(extract_successors(filtered[u].trajectories, state, 2 * half)));
    }

    IIDTestConfig iid;
    iid.pairs = users;
    iid.alphabet = config.states;
    iid.m = half;
    iid.eps1 = config.eps1;
    iid.eps2 = config.eps2;
    iid.delta = config.per_state_delta();
    iid.c = config.c;
    iid.poissonize = config.poissonize;
    const auto verdict =
        iid_tester(reference_sets, filtered_sets, iid, derive_seed(config.seed, {stream::regulatory, state}));
    report.decision = verdict.decision;
    report.g = verdict.statistic.total;
    report.tau = verdict.threshold;
    return report;
}

bool state_failed(const StateReport& r) { return !r.coverage_ok || r.decision == Decision::No; }

}  // namespace

Verdict regulatory_tester(std::span<const FeedBatch> filtered, std::span<const FeedBatch> reference,
                          const RegulatoryConfig& config) {
    if (config.states == 0) throw Error(ErrorKind::InvalidArgument, "need at least one state");
    check_alignment(filtered, reference, config.states);

    Verdict verdict;
    verdict.successor_budget = config.resolved_budget(filtered.size());
    if (config.early_exit) {
        for (State i = 0; i < config.states; ++i) {
            verdict.per_state.push_back(test_state(filtered, reference, i, verdict.successor_budget, config));
            if (state_failed(verdict.per_state.back())) break;
        }
    } else {
        verdict.per_state.resize(config.states);
        parallel_for(config.states, [&](std::size_t i) {
            verdict.per_state[i] =
                test_state(filtered, reference, static_cast<State>(i), verdict.successor_budget, config);
        });
    }

    auto first_failure = std::find_if(verdict.per_state.begin(), verdict.per_state.end(), state_failed);
    if (first_failure == verdict.per_state.end()) {
        verdict.decision = Decision::Yes;
        verdict.reason = Reason::Clean;
    } else {
        verdict.decision = Decision::No;
        verdict.reason = first_failure->coverage_ok ? Reason::Statistic : Reason::Coverage;
    }
    return verdict;
}

std::vector<Verdict> regulatory_tester_intervals(std::span<const std::vector<FeedBatch>> filtered,
                                                 std::span<const std::vector<FeedBatch>> reference,
                                                 const RegulatoryConfig& config) {
    if (filtered.size() != reference.size()) throw Error(ErrorKind::ConfigMismatch, "interval counts differ");
    std::vector<Verdict> verdicts;
    for (std::size_t k = 0; k < filtered.size(); ++k) {
        RegulatoryConfig interval = config;
        interval.seed = derive_seed(config.seed, k);
        verdicts.push_back(regulatory_tester(filtered[k], reference[k], interval));
    }
    return verdicts;
}

double horizon_multiplier(std::size_t users, double delta) {
    if (users == 0 || !(delta > 0.0)) throw Error(ErrorKind::InvalidArgument, "need users > 0 and delta > 0");
    return std::numbers::e * std::log(4.0 * static_cast<double>(users) / delta);
}

std::uint64_t horizon_for_budget(std::span<const ChainPair> chains, std::uint64_t successor_budget, double delta,
                                 std::size_t users, const HorizonOptions& options) {
    if (chains.empty()) throw Error(ErrorKind::InvalidArgument, "need at least one chain pair");
    const std::uint64_t k = std::max<std::uint64_t>(successor_budget, 1);
    CoverTimeOptions cover;
    cover.threads = options.threads;
    double worst = 0.0;
    for (std::size_t u = 0; u < chains.size(); ++u) {
        const auto ref = estimate_cover_time(chains[u].reference, options.walks, k, options.trials,
                                             derive_seed(options.seed, {u, 0}), cover);
        const auto filt = estimate_cover_time(chains[u].filtered, options.walks, k, options.trials,
                                              derive_seed(options.seed, {u, 1}), cover);
        worst = std::max({worst, ref.value(), filt.value()});
    }
    return static_cast<std::uint64_t>(std::ceil(horizon_multiplier(users, delta) * worst));
}

std::uint64_t required_horizon(std::span<const ChainPair> chains, const RegulatoryConfig& config,
                               const HorizonOptions& options) {
    return horizon_for_budget(chains, config.resolved_budget(chains.size()), config.delta, chains.size(), options);
}

}  // namespace feedaudit
