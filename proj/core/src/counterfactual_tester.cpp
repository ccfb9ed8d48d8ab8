#include "feedaudit/counterfactual_tester.hpp"

#include <algorithm>
#include <set>
#include <string>

#include "feedaudit/error.hpp"
#include "feedaudit/oracle.hpp"
#include "feedaudit/parallel.hpp"

namespace feedaudit {

CounterfactualPairing::CounterfactualPairing(std::vector<UserPair> pairs) : pairs_(std::move(pairs)) {
    if (pairs_.empty()) throw Error(ErrorKind::InvalidArgument, "pairing is empty");
    std::set<std::pair<std::uint64_t, std::uint64_t>> seen;
    for (const auto& p : pairs_) {
        if (p.first == p.second) throw Error(ErrorKind::InvalidArgument, "user " + std::to_string(p.first) + " is paired with itself");
        if (!seen.emplace(p.first, p.second).second) {
            throw Error(ErrorKind::InvalidArgument,
                        "pair (" + std::to_string(p.first) + "," + std::to_string(p.second) + ") repeated");
        }
    }
}

std::vector<std::uint64_t> CounterfactualPairing::first_users() const {
    std::set<std::uint64_t> users;
    for (const auto& p : pairs_) users.insert(p.first);
    return {users.begin(), users.end()};
}

std::vector<std::uint64_t> CounterfactualPairing::second_users() const {
    std::set<std::uint64_t> users;
    for (const auto& p : pairs_) users.insert(p.second);
    return {users.begin(), users.end()};
}

Decision combine_blocks(Decision block1, Decision block2) noexcept {
    return block1 == Decision::Yes && block2 == Decision::Yes ? Decision::Yes : Decision::No;
}

namespace {

const FeedBatch& lookup(const std::map<std::uint64_t, FeedBatch>& batches, std::uint64_t user, const char* what) {
    auto it = batches.find(user);
    if (it == batches.end()) {
        throw Error(ErrorKind::PairingMismatch, std::string("no ") + what + " batch for user " + std::to_string(user));
    }
    return it->second;
}

// Inside a block, pair k is "user" k so the two worlds line up.
FeedBatch as_pair_slot(const FeedBatch& batch, std::size_t slot) {
    FeedBatch copy = batch;
    copy.user = slot;
    return copy;
}

}  // namespace

CounterfactualVerdict counterfactual_tester(const CounterfactualPairing& pairing,
                                            const std::map<std::uint64_t, FeedBatch>& filtered,
                                            const std::map<std::uint64_t, FeedBatch>& reference,
                                            const CounterfactualConfig& config, const BlockRunner& runner) {
    std::vector<FeedBatch> shared_reference, first_filtered, second_filtered;
    for (std::size_t k = 0; k < pairing.size(); ++k) {
        const auto& pair = pairing.pairs()[k];
        shared_reference.push_back(as_pair_slot(lookup(reference, pair.first, "reference"), k));
        first_filtered.push_back(as_pair_slot(lookup(filtered, pair.first, "filtered"), k));
        second_filtered.push_back(as_pair_slot(lookup(filtered, pair.second, "filtered"), k));
    }

    RegulatoryConfig block1 = config.base;
    if (!block1.successor_budget) block1.successor_budget = counterfactual_successor_budget(config, pairing.size());
    block1.delta = config.delta_b1;
    block1.seed = derive_seed(config.base.seed, {stream::counterfactual, 1});
    RegulatoryConfig block2 = block1;
    block2.delta = config.delta_b2;
    block2.seed = derive_seed(config.base.seed, {stream::counterfactual, 2});

    CounterfactualVerdict verdict;
    const std::span<const FeedBatch> anchor(shared_reference);
    parallel_for(2, [&](std::size_t b) {
        if (b == 0) {
            verdict.block1 = runner(first_filtered, anchor, block1);
        } else {
            verdict.block2 = runner(second_filtered, anchor, block2);
        }
    });
    verdict.decision = combine_blocks(verdict.block1.decision, verdict.block2.decision);
    return verdict;
}

double counterfactual_variability(const CounterfactualPairing& pairing, const CounterfactualChains& chains) {
    double total = 0.0;
    for (const auto& p : pairing.pairs()) {
        auto a = chains.filtered.find(p.first);
        auto b = chains.filtered.find(p.second);
        if (a == chains.filtered.end() || b == chains.filtered.end()) {
            throw Error(ErrorKind::PairingMismatch, "missing chain for a paired user");
        }
        total += linf_matrix_distance(a->second.matrix(), b->second.matrix());
    }
    return total / static_cast<double>(pairing.size());
}

std::uint64_t counterfactual_successor_budget(const CounterfactualConfig& config, std::size_t pairs) {
    const double n = static_cast<double>(config.base.states);
    const double delta = config.combined_delta();
    return 2 * required_m(n * (n - 1.0) / 2.0, pairs, config.base.eps1, config.base.eps2, delta / (4.0 * n),
                          config.base.budget);
}

std::uint64_t required_horizon_cf(std::span<const ChainPair> chains, std::size_t pairs,
                                  const CounterfactualConfig& config, const HorizonOptions& options) {
    return horizon_for_budget(chains, counterfactual_successor_budget(config, pairs), config.combined_delta(), pairs,
                              options);
}

}  // namespace feedaudit
