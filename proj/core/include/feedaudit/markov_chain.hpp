#pragma once

// Finite-state Markov chains: validation, simulation, stationary and mixing
// diagnostics, joint k-cover times and successor extraction.
//
// States are 0-based internally. The JSON/JSONL boundary (see io.hpp) is the
// only place where the 1-based labels of the external formats appear.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "feedaudit/rng.hpp"

namespace feedaudit {

using State = std::uint32_t;

/// Dense square matrix, row-major.
class Matrix {
public:
    Matrix() = default;
    explicit Matrix(std::size_t n, double fill = 0.0) : n_(n), data_(n * n, fill) {}

    /// Throws InvalidArgument unless rows form a non-empty square matrix.
    static Matrix from_rows(const std::vector<std::vector<double>>& rows);
    static Matrix identity(std::size_t n);

    std::size_t size() const noexcept { return n_; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * n_ + j]; }
    double& operator()(std::size_t i, std::size_t j) { return data_[i * n_ + j]; }
    std::span<const double> row(std::size_t i) const { return {data_.data() + i * n_, n_}; }
    std::span<double> row(std::size_t i) { return {data_.data() + i * n_, n_}; }

    std::vector<std::vector<double>> to_rows() const;

    bool operator==(const Matrix&) const = default;

private:
    std::size_t n_ = 0;
    std::vector<double> data_;
};

Matrix multiply(const Matrix& a, const Matrix& b);
/// Row vector times matrix.
std::vector<double> left_multiply(std::span<const double> x, const Matrix& m);

/// Row-stochastic, irreducible transition matrix. Only constructible through
/// validate_chain, so every instance satisfies both invariants.
class MarkovChain {
public:
    std::size_t num_states() const noexcept { return matrix_.size(); }
    const Matrix& matrix() const noexcept { return matrix_; }
    double prob(State from, State to) const { return matrix_(from, to); }

    State sample_next(State from, Rng& rng) const;

    bool operator==(const MarkovChain& other) const { return matrix_ == other.matrix_; }

private:
    friend MarkovChain validate_chain(const Matrix& rows);
    explicit MarkovChain(Matrix m);

    Matrix matrix_;
    std::vector<double> cumulative_;
};

/// Row sums within 1e-9 of one are renormalised; anything further off is
/// NotStochastic. Also rejects NegativeEntry, non-finite entries and chains
/// whose positive-entry graph is not strongly connected (NotIrreducible).
MarkovChain validate_chain(const Matrix& rows);
MarkovChain validate_chain(const std::vector<std::vector<double>>& rows);

/// True iff the directed graph of strictly positive entries is strongly connected.
bool is_irreducible(const Matrix& m);

/// Draws an index from an inclusive prefix-sum table whose last entry is ~1.
State sample_cumulative(std::span<const double> cumulative, Rng& rng);
std::vector<double> prefix_sums(std::span<const double> probs);

struct Trajectory {
    std::vector<State> states;

    State start() const { return states.front(); }
    std::size_t length() const noexcept { return states.size(); }
    bool operator==(const Trajectory&) const = default;
};

Trajectory simulate_trajectory(const MarkovChain& chain, State start, std::size_t length, std::uint64_t seed);
Trajectory simulate_trajectory(const MarkovChain& chain, State start, std::size_t length, Rng& rng);

/// Occurrence counts of each state over a trajectory prefix.
class CountingMeasure {
public:
    explicit CountingMeasure(std::size_t n) : counts_(n, 0) {}
    static CountingMeasure of(std::span<const State> prefix, std::size_t n);

    void add(State s) {
        ++counts_[s];
        ++total_;
    }
    std::uint64_t operator[](State s) const { return counts_[s]; }
    std::uint64_t total() const noexcept { return total_; }
    std::span<const std::uint64_t> counts() const noexcept { return counts_; }

private:
    std::vector<std::uint64_t> counts_;
    std::uint64_t total_ = 0;
};

/// Power iteration from the uniform vector until ||pi M - pi||_1 <= tol. The
/// mean of the last two iterates is also tried, which converges on period-2
/// chains. Throws NoConvergence after max_iterations.
std::vector<double> stationary_distribution(const MarkovChain& chain, double tol = 1e-12,
                                            std::size_t max_iterations = 1'000'000);

/// Smallest t >= 1 with max_i TV(delta_i M^t, pi) <= 1/4, by exact powering.
/// Point masses suffice because TV to pi is convex in the initial law.
/// Throws CapExceeded past `cap` (periodic chains never get there).
std::uint64_t mixing_time_estimate(const MarkovChain& chain, std::uint64_t cap = 100'000);

/// First time t (1-based, the start state counts as a visit at t = 1) at which
/// the pooled visit counts of all walks reach k for every state. Operates on
/// realised prefixes; throws BudgetExceeded if they run out or t passes budget.
std::uint64_t joint_k_cover_stop(std::span<const Trajectory> walks, std::size_t n, std::uint64_t k,
                                 std::uint64_t budget = UINT64_MAX);

/// Same stop rule, but the walks are extended lazily from `starts`.
std::uint64_t joint_k_cover_stop(const MarkovChain& chain, std::span<const State> starts, std::uint64_t k,
                                 Rng& rng, std::uint64_t budget = 100'000'000);

struct CoverTimeProfile {
    /// Homogeneous start state, or nullopt for independent stationary starts.
    std::optional<State> start;
    double mean = 0.0;
    double std_error = 0.0;
    std::vector<std::uint64_t> samples;  ///< filled only when requested
};

struct CoverTimeEstimate {
    std::uint64_t walks = 0;
    std::uint64_t k = 0;
    std::size_t trials = 0;
    std::vector<CoverTimeProfile> profiles;  ///< n homogeneous starts, then stationary
    std::size_t worst_profile = 0;

    double value() const { return profiles[worst_profile].mean; }
    double std_error() const { return profiles[worst_profile].std_error; }
};

struct CoverTimeOptions {
    std::uint64_t budget = 100'000'000;
    bool keep_samples = false;
    unsigned threads = 0;
};

/// Monte Carlo m-joint-k-cover time. The max over all [n]^m start vectors is
/// approximated by the n "every walk starts at v" profiles plus the
/// stationary-start profile. Requires trials >= 100.
CoverTimeEstimate estimate_cover_time(const MarkovChain& chain, std::uint64_t walks, std::uint64_t k,
                                      std::size_t trials, std::uint64_t seed, const CoverTimeOptions& options = {});

/// Number of visits to `state` that have a successor (final positions excluded).
std::uint64_t successor_bearing_visits(std::span<const Trajectory> trajectories, State state);

/// The first `count` immediate successors of `state`, scanning trajectories in
/// order. Throws InsufficientCoverage when fewer are available.
std::vector<State> extract_successors(std::span<const Trajectory> trajectories, State state, std::size_t count);

struct ChainDiagnostics {
    struct CoverEntry {
        std::uint64_t k;
        std::uint64_t walks;
        double value;
        double std_error;
    };

    std::vector<double> stationary;
    double pi_star = 0.0;
    std::optional<std::uint64_t> t_mix_hat;  ///< nullopt when the cap is exceeded
    std::vector<CoverEntry> cover;
};

struct CoverRequest {
    std::uint64_t k;
    std::uint64_t walks;
};

ChainDiagnostics diagnose_chain(const MarkovChain& chain, std::span<const CoverRequest> requests = {},
                                std::size_t trials = 1000, std::uint64_t seed = 0);

}  // namespace feedaudit
