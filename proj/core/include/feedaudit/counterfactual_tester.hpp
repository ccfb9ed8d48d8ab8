#pragma once

// Counterfactual regulation: two filtered-vs-reference blocks anchored on the
// reference feeds of the first user of every counterfactual pair, combined by
// the triangle inequality.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <vector>

#include "feedaudit/regulatory_tester.hpp"

namespace feedaudit {

struct UserPair {
    std::uint64_t first = 0;
    std::uint64_t second = 0;
    bool operator==(const UserPair&) const = default;
};

class CounterfactualPairing {
public:
    /// Throws InvalidArgument on an empty list, a repeated pair or i == j.
    explicit CounterfactualPairing(std::vector<UserPair> pairs);

    std::span<const UserPair> pairs() const noexcept { return pairs_; }
    std::size_t size() const noexcept { return pairs_.size(); }
    /// Distinct users in first / second position, ascending.
    std::vector<std::uint64_t> first_users() const;
    std::vector<std::uint64_t> second_users() const;

private:
    std::vector<UserPair> pairs_;
};

struct CounterfactualConfig {
    RegulatoryConfig base;
    double delta_b1 = 0.1;
    double delta_b2 = 0.1;

    double combined_delta() const { return std::max(delta_b1, delta_b2); }
};

struct CounterfactualVerdict {
    Decision decision = Decision::No;
    Verdict block1;
    Verdict block2;
};

/// YES iff both blocks say YES.
Decision combine_blocks(Decision block1, Decision block2) noexcept;

using BlockRunner =
    std::function<Verdict(std::span<const FeedBatch>, std::span<const FeedBatch>, const RegulatoryConfig&)>;

/// Block 1 tests filtered_i against reference_i and block 2 tests filtered_j
/// against the same reference_i, for every pair (i, j). Both blocks receive the
/// same reference sequence object. Unless the base config fixes m-bar, both
/// blocks use counterfactual_successor_budget. Throws PairingMismatch when a referenced
/// user has no batch.
CounterfactualVerdict counterfactual_tester(const CounterfactualPairing& pairing,
                                            const std::map<std::uint64_t, FeedBatch>& filtered,
                                            const std::map<std::uint64_t, FeedBatch>& reference,
                                            const CounterfactualConfig& config,
                                            const BlockRunner& runner = regulatory_tester);

/// Per-pair chains of the true model (oracle context).
struct CounterfactualChains {
    std::map<std::uint64_t, MarkovChain> filtered;
};

/// (1/|pairs|) * sum over pairs of ||Q_i - Q_j||_inf.
double counterfactual_variability(const CounterfactualPairing& pairing, const CounterfactualChains& chains);

/// Inner successor budget: 2 * required_m(n(n-1)/2, |pairs|, eps1, eps2, delta / 4n)
/// with delta = max(delta_b1, delta_b2).
std::uint64_t counterfactual_successor_budget(const CounterfactualConfig& config, std::size_t pairs);

/// Horizon at the counterfactual budget; `chains` lists the reference and
/// filtered chains of every user involved.
std::uint64_t required_horizon_cf(std::span<const ChainPair> chains, std::size_t pairs,
                                  const CounterfactualConfig& config, const HorizonOptions& options);

}  // namespace feedaudit
