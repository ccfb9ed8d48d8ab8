#pragma once

// Synthetic platform scenarios: per-user reference/filtered chain pairs with a
// controlled l-infinity gap, optional re-filtering epochs, and injected
// adversarial users.
//
// Reference chains are uniform (every entry 1/n). A filtered chain differs
// from its reference in one designated row, where gap/2 of mass is moved onto
// a target state and taken evenly from the other n-1 entries. A self-loop hint
// s then replaces both chains by s*I + (1-s)*chain, which slows mixing and
// scales the realised gap by (1-s); the construction compensates so the final
// distance hits the requested target.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "feedaudit/markov_chain.hpp"
#include "feedaudit/oracle.hpp"
#include "feedaudit/regulatory_tester.hpp"

namespace feedaudit {

enum class Placement { End, Start };

struct ScenarioSpec {
    std::size_t states = 2;    ///< n
    std::size_t users = 1;     ///< U honest users
    std::vector<double> gaps;  ///< per-user target ||P^R_u - Q^F_u||_inf, one per user
    double self_loop = 0.0;    ///< mixing hint s in [0, 1)
    std::size_t epochs = 1;
    std::size_t adversarial = 0;
    Placement placement = Placement::End;
    std::optional<double> floor;  ///< minimum base-row entry, default 1/(10n)
    double eps1 = 0.0;
    double eps2 = 0.5;

    double resolved_floor() const;
    /// Largest per-user gap the construction can realise.
    double max_gap() const;
    /// Throws InvalidArgument on n < 2, U < 1, a gap outside [0, 2], a gap
    /// count other than U, s outside [0, 1), zero epochs or a floor outside [0, 1/n].
    void validate() const;
};

struct ScenarioUser {
    MarkovChain reference;
    MarkovChain filtered;
    double distance = 0.0;
    bool adversarial = false;
};

struct Epoch {
    std::vector<ScenarioUser> users;
    double total_distance = 0.0;
    Regime regime = Regime::Null;
};

struct Scenario {
    ScenarioSpec spec;
    std::vector<Epoch> epochs;

    std::size_t num_users() const { return epochs.front().users.size(); }
    ScenarioTruth truth(std::size_t epoch = 0) const;
    std::vector<ChainPair> chain_pairs(std::size_t epoch = 0) const;
    /// (1/U) * total distance of the epoch.
    double average_variability(std::size_t epoch = 0) const;
};

/// Epoch 0 perturbs row n-1 towards state 0 for every user; later epochs draw
/// a fresh (row, target) pair shared by all users. Adversarial users requested
/// through `spec.adversarial` are added after the honest ones are built. Throws InfeasibleGap
/// when a target exceeds max_gap().
Scenario make_scenario(const ScenarioSpec& spec, std::uint64_t seed);

struct Feeds {
    std::vector<FeedBatch> filtered;
    std::vector<FeedBatch> reference;
};

/// M trajectories of length T per user and world, stationary starts, streams
/// derived from (seed, epoch, user, world).
Feeds generate_feeds(const Scenario& scenario, std::size_t walks, std::size_t horizon, std::uint64_t seed,
                     std::size_t epoch = 0);

/// Adds `count` users at the maximal feasible gap to every epoch, at the end or
/// the start of the population per `scenario.spec.placement`, and recomputes totals.
Scenario inject_adversarial_users(Scenario scenario, std::size_t count, std::uint64_t seed);

}  // namespace feedaudit
