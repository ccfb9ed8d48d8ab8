#pragma once

// Ground truth for validating the testers: exact distances between known
// chains, the filtering-variability metric, Monte Carlo verdict rates, G
// moments and a plug-in transition estimate. Oracle code works on raw
// matrices, so reducible boundary fixtures are allowed here and only here.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "feedaudit/markov_chain.hpp"
#include "feedaudit/regulatory_tester.hpp"

namespace feedaudit {

/// Maximum absolute row sum of A - B. Throws DimensionMismatch.
double linf_matrix_distance(const Matrix& a, const Matrix& b);

enum class Regime { Null, Alt, Gap };
std::string_view to_string(Regime r) noexcept;

/// Null iff total <= U eps1, Alt iff total >= U eps2, Gap otherwise.
Regime classify_regime(double total_distance, std::size_t users, double eps1, double eps2);

struct UserTruth {
    Matrix reference;  ///< P^R_u
    Matrix filtered;   ///< Q^F_u
    double distance = 0.0;
};

struct ScenarioTruth {
    std::vector<UserTruth> users;
    double eps1 = 0.0;
    double eps2 = 0.5;
    double total_distance = 0.0;
    Regime regime = Regime::Null;
};

/// Fills per-user distances, their sum and the regime label.
ScenarioTruth make_truth(std::vector<std::pair<Matrix, Matrix>> reference_filtered, double eps1, double eps2);

/// (1/U) * sum_u ||P^R_u - Q^F_u||_inf.
double total_filter_variability(const ScenarioTruth& truth);

struct YesRate {
    std::size_t trials = 0;
    std::size_t yes = 0;
    double rate = 0.0;
    double std_error = 0.0;  ///< binomial, sqrt(rate (1 - rate) / trials)
};

/// Runs `trial(seed_t)` for t < trials with seed_t derived from (seed, t) and
/// tallies YES decisions. Trial order never affects the result.
YesRate estimate_yes_rate(std::size_t trials, std::uint64_t seed, const std::function<Decision(std::uint64_t)>& trial,
                          unsigned threads = 0);

/// Simulate-then-test pipeline for the filtered-vs-reference tester.
struct RegulatoryPipeline {
    RegulatoryConfig config;
    std::size_t walks = 1;    ///< M
    std::size_t horizon = 1;  ///< T
};

/// Each trial simulates fresh filtered and reference batches from the true
/// chains and runs the regulatory tester. Requires trials >= 100.
YesRate verdict_probability(const ScenarioTruth& truth, const RegulatoryPipeline& pipeline, std::size_t trials,
                            std::uint64_t seed, unsigned threads = 0);

struct GMoments {
    std::vector<double> mean;      ///< per symbol
    std::vector<double> variance;  ///< per symbol, unbiased sample variance
    std::vector<double> mean_se;   ///< standard error of each mean
};

/// Monte Carlo moments of G_i = (V_i - Y_i)^2 - V_i - Y_i with independent
/// V_i ~ Poisson(m p_i), Y_i ~ Poisson(m q_i). Requires trials >= 10^4.
GMoments empirical_g_moments(std::span<const double> p, std::span<const double> q, double m, std::size_t trials,
                             std::uint64_t seed);

struct PluginEstimate {
    Matrix transitions;          ///< row i = empirical successor law of i (zero if uncovered)
    std::vector<bool> uncovered; ///< rows with no successor-bearing visit
    bool any_uncovered() const;
};

PluginEstimate plugin_chain_estimate(const FeedBatch& batch, std::size_t n);

struct ResultRow {
    std::string scenario_id;
    std::string tester;
    std::size_t trials = 0;
    double yes_rate = 0.0;
    double se = 0.0;
    std::uint64_t seed = 0;
};

/// Appends rows to a CSV (scenario_id,tester,trials,yes_rate,se,seed), writing
/// the header when the file is new or empty.
void append_results_csv(const std::filesystem::path& path, std::span<const ResultRow> rows);
std::string format_csv_row(const ResultRow& row);

}  // namespace feedaudit
