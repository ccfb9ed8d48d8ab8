#pragma once

// Filtered-vs-reference regulation over Markov feed trajectories.
//
// For every state i the tester checks that each user's filtered and reference
// batches visit i often enough, pools the first successors of i through the
// successor map, and runs the i.i.d. tester on the U resulting pairs. Any
// failing state makes the overall verdict NO.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "feedaudit/iid_tester.hpp"
#include "feedaudit/markov_chain.hpp"

namespace feedaudit {

enum class World { Filtered, Reference };
std::string_view to_string(World w) noexcept;

struct FeedBatch {
    std::uint64_t user = 0;
    World world = World::Filtered;
    std::vector<Trajectory> trajectories;

    /// Throws InvalidArgument unless M >= 1, all trajectories share one length
    /// T >= 1 and every label is below n.
    void validate(std::size_t n) const;
    std::size_t horizon() const { return trajectories.empty() ? 0 : trajectories.front().length(); }
};

/// M trajectories of length T, each started from an independent draw of the
/// chain's stationary distribution. Trajectory j uses stream (seed, j).
FeedBatch simulate_batch(const MarkovChain& chain, std::uint64_t user, World world, std::size_t walks,
                         std::size_t horizon, std::uint64_t seed);

/// The reference chain P^R_u and filtered chain Q^F_u of one user.
struct ChainPair {
    MarkovChain reference;
    MarkovChain filtered;
};

struct RegulatoryConfig {
    std::size_t states = 2;  ///< n
    double eps1 = 0.0;
    double eps2 = 0.5;
    double delta = 0.1;
    /// Successors drawn per user, world and state (m-bar). Unset means the
    /// default budget for the number of users in the call.
    std::optional<std::uint64_t> successor_budget;
    double c = kDefaultThresholdConstant;
    SampleBudgetConstants budget;
    bool poissonize = false;
    bool early_exit = true;
    std::uint64_t seed = 0;

    double per_state_delta() const { return delta / (2.0 * static_cast<double>(states)); }
    std::uint64_t resolved_budget(std::size_t users) const;
};

/// 2 * required_m(n, U, eps1, eps2, delta / 2n): each half of the per-state
/// i.i.d. test gets required_m successors.
std::uint64_t default_successor_budget(std::size_t states, std::size_t users, double eps1, double eps2, double delta,
                                       const SampleBudgetConstants& constants);

enum class Reason { Coverage, Statistic, Clean };
std::string_view to_string(Reason r) noexcept;

struct StateReport {
    State state = 0;
    bool coverage_ok = false;
    std::optional<Decision> decision;  ///< unset when coverage failed
    std::optional<double> g;
    std::optional<double> tau;
    std::vector<std::uint64_t> filtered_successors;   ///< per user, successor-bearing visits
    std::vector<std::uint64_t> reference_successors;
};

struct Verdict {
    Decision decision = Decision::No;
    Reason reason = Reason::Clean;
    std::uint64_t successor_budget = 0;
    std::vector<StateReport> per_state;  ///< ascending state order, up to the exit state
};

/// True iff the batch has at least `budget` visits to `state` with a successor.
bool coverage_gate(const FeedBatch& batch, State state, std::uint64_t budget);

/// Runs the per-state tests in ascending state order. Batches must be aligned
/// by user; throws ConfigMismatch otherwise. With early_exit off every state is
/// evaluated, which never changes the decision.
Verdict regulatory_tester(std::span<const FeedBatch> filtered, std::span<const FeedBatch> reference,
                          const RegulatoryConfig& config);

/// One verdict per re-filtering interval; intervals share no state.
std::vector<Verdict> regulatory_tester_intervals(std::span<const std::vector<FeedBatch>> filtered,
                                                 std::span<const std::vector<FeedBatch>> reference,
                                                 const RegulatoryConfig& config);

struct HorizonOptions {
    std::uint64_t walks = 1;  ///< M
    std::size_t trials = 200;
    std::uint64_t seed = 0;
    unsigned threads = 0;
};

/// e * ln(4U / delta). delta may exceed 1 here; only delta > 0 is required.
double horizon_multiplier(std::size_t users, double delta);

/// Largest estimated M-joint-k-cover time over every user's two chains, with
/// k = successor_budget, scaled by horizon_multiplier and rounded up.
std::uint64_t horizon_for_budget(std::span<const ChainPair> chains, std::uint64_t successor_budget, double delta,
                                 std::size_t users, const HorizonOptions& options);

std::uint64_t required_horizon(std::span<const ChainPair> chains, const RegulatoryConfig& config,
                               const HorizonOptions& options);

}  // namespace feedaudit
