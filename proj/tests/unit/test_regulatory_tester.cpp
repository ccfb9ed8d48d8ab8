#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "feedaudit/error.hpp"
#include "feedaudit/regulatory_tester.hpp"

using namespace feedaudit;

namespace {

Trajectory traj(std::initializer_list<State> one_based) {
    Trajectory t;
    for (State s : one_based) t.states.push_back(s - 1);
    return t;
}

const MarkovChain& fair() {
    static const MarkovChain c = validate_chain({{0.5, 0.5}, {0.5, 0.5}});
    return c;
}

std::vector<FeedBatch> batches(const MarkovChain& c, World w, std::size_t users, std::size_t walks, std::size_t t,
                               std::uint64_t seed) {
    std::vector<FeedBatch> out;
    for (std::size_t u = 0; u < users; ++u) out.push_back(simulate_batch(c, u, w, walks, t, derive_seed(seed, u)));
    return out;
}

RegulatoryConfig config2(std::uint64_t budget) {
    RegulatoryConfig c;
    c.states = 2;
    c.successor_budget = budget;
    c.seed = 3;
    return c;
}

}  // namespace

TEST(CoverageGate, FinalPositionExcluded) {
    const FeedBatch b{0, World::Filtered, {traj({1, 2, 1, 1, 2, 1})}};
    EXPECT_FALSE(coverage_gate(b, 0, 4));
    EXPECT_TRUE(coverage_gate(b, 0, 3));
    EXPECT_TRUE(coverage_gate(b, 1, 0));
}

TEST(FeedBatch, Validation) {
    FeedBatch b{0, World::Filtered, {traj({1, 2}), traj({1})}};
    EXPECT_THROW(b.validate(2), Error);
    b.trajectories = {traj({1, 3})};
    EXPECT_THROW(b.validate(2), Error);
    b.trajectories.clear();
    EXPECT_THROW(b.validate(2), Error);
}

TEST(SimulateBatch, ShapeAndDeterminism) {
    const auto a = simulate_batch(fair(), 4, World::Reference, 3, 50, 9);
    EXPECT_EQ(a.user, 4u);
    EXPECT_EQ(a.trajectories.size(), 3u);
    EXPECT_EQ(a.horizon(), 50u);
    EXPECT_EQ(a.trajectories, simulate_batch(fair(), 4, World::Reference, 3, 50, 9).trajectories);
}

TEST(SimulateBatch, StartsFollowStationaryLaw) {
    const auto c = validate_chain({{0.9, 0.1}, {0.2, 0.8}});
    const auto b = simulate_batch(c, 0, World::Filtered, 20000, 1, 1);
    double first = 0;
    for (const auto& t : b.trajectories) first += t.start() == 0;
    EXPECT_NEAR(first / 20000.0, 2.0 / 3.0, 0.015);
}

TEST(Regulatory, IdenticalBatchesSayYes) {
    const auto f = batches(fair(), World::Filtered, 3, 4, 400, 1);
    auto r = f;
    for (auto& b : r) b.world = World::Reference;
    const auto v = regulatory_tester(f, r, config2(200));
    EXPECT_EQ(v.decision, Decision::Yes);
    EXPECT_EQ(v.reason, Reason::Clean);
    ASSERT_EQ(v.per_state.size(), 2u);
    for (const auto& s : v.per_state) EXPECT_LE(*s.g, 0.0);
}

TEST(Regulatory, ShortFeedsFailCoverage) {
    const auto f = batches(fair(), World::Filtered, 2, 1, 5, 1);
    const auto r = batches(fair(), World::Reference, 2, 1, 5, 2);
    const auto v = regulatory_tester(f, r, config2(50));
    EXPECT_EQ(v.decision, Decision::No);
    EXPECT_EQ(v.reason, Reason::Coverage);
    EXPECT_FALSE(v.per_state.front().coverage_ok);
    EXPECT_FALSE(v.per_state.front().decision.has_value());
}

TEST(Regulatory, SingleStepFeedsFailCoverage) {
    const auto f = batches(fair(), World::Filtered, 1, 1, 1, 1);
    const auto r = batches(fair(), World::Reference, 1, 1, 1, 2);
    EXPECT_EQ(regulatory_tester(f, r, config2(1)).reason, Reason::Coverage);
}

TEST(Regulatory, MisalignedUsers) {
    auto f = batches(fair(), World::Filtered, 2, 1, 50, 1);
    auto r = batches(fair(), World::Reference, 3, 1, 50, 2);
    EXPECT_THROW(regulatory_tester(f, r, config2(5)), Error);
    r.pop_back();
    r[1].user = 7;
    try {
        regulatory_tester(f, r, config2(5));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::ConfigMismatch);
    }
}

TEST(Regulatory, DistantChainsSayNo) {
    const auto q = validate_chain({{0.5, 0.5}, {1.0, 0.0}});
    const auto f = batches(q, World::Filtered, 2, 10, 600, 4);
    const auto r = batches(fair(), World::Reference, 2, 10, 600, 5);
    const auto v = regulatory_tester(f, r, config2(400));
    EXPECT_EQ(v.decision, Decision::No);
    EXPECT_EQ(v.reason, Reason::Statistic);
    EXPECT_EQ(v.per_state.back().state, 1u);
}

TEST(Regulatory, EarlyExitNeverChangesDecision) {
    const auto q = validate_chain({{0.5, 0.5}, {0.8, 0.2}});
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto f = batches(q, World::Filtered, 2, 5, 200, derive_seed(seed, 1));
        const auto r = batches(fair(), World::Reference, 2, 5, 200, derive_seed(seed, 2));
        auto cfg = config2(120);
        cfg.seed = seed;
        const auto fast = regulatory_tester(f, r, cfg);
        cfg.early_exit = false;
        const auto full = regulatory_tester(f, r, cfg);
        EXPECT_EQ(fast.decision, full.decision);
        EXPECT_EQ(full.per_state.size(), 2u);
        EXPECT_EQ(fast.reason, full.reason);
    }
}

TEST(Regulatory, Deterministic) {
    const auto f = batches(fair(), World::Filtered, 3, 2, 300, 1);
    const auto r = batches(fair(), World::Reference, 3, 2, 300, 2);
    auto cfg = config2(200);
    cfg.poissonize = true;
    const auto a = regulatory_tester(f, r, cfg);
    const auto b = regulatory_tester(f, r, cfg);
    ASSERT_EQ(a.per_state.size(), b.per_state.size());
    for (std::size_t i = 0; i < a.per_state.size(); ++i) {
        EXPECT_EQ(a.per_state[i].g, b.per_state[i].g);
        EXPECT_EQ(a.per_state[i].filtered_successors, b.per_state[i].filtered_successors);
    }
}

TEST(Regulatory, StateStatisticOnlySeesItsSuccessors) {
    const auto c = validate_chain({{0.2, 0.4, 0.4}, {0.3, 0.3, 0.4}, {0.5, 0.25, 0.25}});
    auto f = batches(c, World::Filtered, 2, 3, 500, 1);
    const auto r = batches(c, World::Reference, 2, 3, 500, 2);
    auto cfg = config2(150);
    cfg.states = 3;
    cfg.early_exit = false;
    const auto before = regulatory_tester(f, r, cfg);
    // Rewrite transitions between nonzero states only: visits to state 0 and
    // its successors stay put.
    Rng rng(4);
    for (auto& b : f) {
        for (auto& t : b.trajectories) {
            for (std::size_t k = 0; k + 1 < t.states.size(); ++k) {
                if (t.states[k] != 0 && t.states[k + 1] != 0) t.states[k + 1] = 1 + static_cast<State>(rng() % 2);
            }
        }
    }
    const auto after = regulatory_tester(f, r, cfg);
    EXPECT_EQ(before.per_state[0].g, after.per_state[0].g);
    EXPECT_EQ(before.per_state[0].filtered_successors, after.per_state[0].filtered_successors);
}

TEST(Regulatory, IntervalsAreIndependentRuns) {
    const std::vector<std::vector<FeedBatch>> f{batches(fair(), World::Filtered, 1, 2, 300, 1),
                                                batches(fair(), World::Filtered, 1, 2, 3, 2)};
    const std::vector<std::vector<FeedBatch>> r{batches(fair(), World::Reference, 1, 2, 300, 3),
                                                batches(fair(), World::Reference, 1, 2, 3, 4)};
    const auto v = regulatory_tester_intervals(f, r, config2(100));
    ASSERT_EQ(v.size(), 2u);
    EXPECT_EQ(v[1].reason, Reason::Coverage);
    EXPECT_NE(v[0].reason, Reason::Coverage);
}

TEST(Regulatory, DefaultBudgetUsesPerStateRisk) {
    RegulatoryConfig cfg;
    cfg.states = 4;
    cfg.delta = 0.2;
    EXPECT_EQ(cfg.resolved_budget(3), 2 * required_m(4, 3, 0.0, 0.5, 0.2 / 8));
}

TEST(Horizon, MultiplierIdentity) {
    EXPECT_NEAR(horizon_multiplier(1, 4.0 / std::numbers::e), std::numbers::e, 1e-12);
    EXPECT_THROW(horizon_multiplier(1, 0.0), Error);
}

TEST(Horizon, MonotoneInBudget) {
    const std::vector<ChainPair> chains{{fair(), validate_chain({{0.7, 0.3}, {0.4, 0.6}})}};
    HorizonOptions opts;
    opts.walks = 2;
    opts.seed = 11;
    std::uint64_t prev = 0;
    for (std::uint64_t k : {5, 10, 20, 40}) {
        const auto h = horizon_for_budget(chains, k, 0.1, 1, opts);
        EXPECT_GE(h, prev);
        prev = h;
    }
}

TEST(Horizon, MatchesIndependentCoverEstimate) {
    // Re-estimate the 2-walk, 10-cover time of the fair chain by direct
    // simulation: each step of each walk lands on either state with prob 1/2.
    const std::size_t trials = 4000;
    Rng rng(12345);
    auto stop_time = [&](State a, State b) {
        std::uint64_t c[2] = {0, 0};
        ++c[a];
        ++c[b];
        std::uint64_t t = 1;
        while (c[0] < 10 || c[1] < 10) {
            ++t;
            ++c[rng() >> 63];
            ++c[rng() >> 63];
        }
        return static_cast<double>(t);
    };
    double best_mean = 0.0, best_se = 0.0;
    for (int profile = 0; profile < 3; ++profile) {
        double sum = 0.0, sq = 0.0;
        for (std::size_t k = 0; k < trials; ++k) {
            const State a = profile < 2 ? State(profile) : State(rng() >> 63);
            const State b = profile < 2 ? State(profile) : State(rng() >> 63);
            const double t = stop_time(a, b);
            sum += t;
            sq += t * t;
        }
        const double mean = sum / trials;
        const double se = std::sqrt((sq / trials - mean * mean) / (trials - 1));
        if (mean > best_mean) best_mean = mean, best_se = se;
    }
    const std::vector<ChainPair> chains{{fair(), fair()}};
    HorizonOptions opts;
    opts.walks = 2;
    opts.trials = trials;
    opts.seed = 99;
    const double mult = horizon_multiplier(1, 0.1);
    const double library = static_cast<double>(horizon_for_budget(chains, 10, 0.1, 1, opts)) / mult;
    EXPECT_NEAR(library, best_mean, 2.0 * std::sqrt(2.0) * best_se + 1.0 / mult);
}
