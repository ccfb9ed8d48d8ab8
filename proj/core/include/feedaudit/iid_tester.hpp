#pragma once

// Sum-of-pairs tolerant closeness tester on i.i.d. samples.
//
// For U pairs (P_u, Q_u) over an n-symbol alphabet the tester decides between
//   sum_u ||P_u - Q_u||_1 <= U * eps1   and   sum_u ||P_u - Q_u||_1 >= U * eps2
// from two disjoint halves of (optionally Poissonised) samples per distribution.
// The first halves feed the statistic G; the second halves feed the f-hat
// weights that normalise each symbol's contribution.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "feedaudit/markov_chain.hpp"
#include "feedaudit/rng.hpp"

namespace feedaudit {

enum class Decision { Yes, No };
std::string_view to_string(Decision d) noexcept;

/// Threshold constant and sample-budget multiplier from the shipped calibration run.
inline constexpr double kDefaultThresholdConstant = 0.5685204640703567;
inline constexpr double kDefaultBudgetMultiplier = 16.0;

struct IIDTestConfig {
    std::size_t pairs = 1;     ///< U
    std::size_t alphabet = 2;  ///< n
    std::uint64_t m = 0;       ///< nominal per-half sample size
    double eps1 = 0.0;
    double eps2 = 0.5;
    double delta = 0.1;
    double c = kDefaultThresholdConstant;
    bool poissonize = true;

    /// Throws InvalidArgument on eps1 >= eps2 (unless both are 0), delta outside (0,1) or c <= 0.
    void validate() const;
};

/// Counts for one distribution: V from the first half, V-tilde from the second.
struct HalfCounts {
    std::vector<std::uint64_t> primary;
    std::vector<std::uint64_t> auxiliary;
    std::uint64_t primary_draw = 0;    ///< requested size of the first half (Poisson draw or m)
    std::uint64_t auxiliary_draw = 0;  ///< same for the second half
    bool truncated = false;            ///< a Poisson draw exceeded the available data
};

/// Counts for one pair u. `p` holds V and V-tilde, `q` holds Y and Y-tilde.
struct SampleCounts {
    HalfCounts p;
    HalfCounts q;
    std::uint64_t nominal_m = 0;
};

/// Tabulates two disjoint halves. With Poissonisation a size K ~ Poisson(m) is
/// drawn per half and the first min(K, available) symbols are used (flagging
/// truncation); otherwise exactly m symbols are used and fewer is
/// InsufficientSamples.
HalfCounts build_counts(std::span<const State> first_half, std::span<const State> second_half,
                        const IIDTestConfig& config, Rng& rng);

/// f-hat weights for one pair, computed from the second-half counts only.
std::vector<double> f_hat(const SampleCounts& counts, std::uint64_t m, std::size_t n);

struct GStatistic {
    std::vector<std::vector<double>> raw;    ///< G_{u,i} = (V-Y)^2 - V - Y
    std::vector<std::vector<double>> f_hat;  ///< weights, all >= 1
    std::vector<std::vector<double>> terms;  ///< G_{u,i} / f-hat_{u,i}
    double total = 0.0;
};

GStatistic g_statistic(std::span<const SampleCounts> counts, std::span<const std::vector<double>> weights);
/// Convenience overload computing the weights from the counts.
GStatistic g_statistic(std::span<const SampleCounts> counts, const IIDTestConfig& config);

/// tau = c * min(m^{3/2} eps2 / sqrt(n), U m^2 eps2^2 / n).
double threshold(const IIDTestConfig& config);

struct IIDVerdict {
    Decision decision = Decision::No;
    GStatistic statistic;
    double threshold = 0.0;
    bool truncated = false;
    std::vector<SampleCounts> counts;
};

/// YES iff G < tau; a tie is NO.
IIDVerdict decide(std::vector<SampleCounts> counts, const IIDTestConfig& config);

/// Raw samples of one distribution, already split into its two halves.
struct SampleSet {
    std::vector<State> first_half;
    std::vector<State> second_half;
};

/// Full tester on raw samples. Poisson draws come from per-(u, world, half)
/// streams derived from `seed`.
IIDVerdict iid_tester(std::span<const SampleSet> p_sets, std::span<const SampleSet> q_sets,
                      const IIDTestConfig& config, std::uint64_t seed);

struct SampleBudgetConstants {
    double multiplier = kDefaultBudgetMultiplier;  ///< C
    double regime_ratio = 0.5;                     ///< eps1 must not exceed regime_ratio * eps2
};

/// ceil(C * (sqrt(n/(eps2^4 delta U)) + n eps1^2/eps2^4 + n eps1/eps2^2 + n^{2/3}/(U eps2^{4/3}))).
/// `alphabet` is real-valued so callers can pass derived alphabet parameters.
std::uint64_t required_m(double alphabet, std::size_t pairs, double eps1, double eps2, double delta,
                         const SampleBudgetConstants& constants = {});

// ---------------------------------------------------------------------------
// Calibration of (c, C)

struct CalibrationPoint {
    std::size_t alphabet = 2;
    std::size_t pairs = 1;
    double eps1 = 0.0;
    double eps2 = 0.5;
    double delta = 0.1;
    bool null_instance = true;
    std::vector<std::vector<double>> p;  ///< one distribution per pair
    std::vector<std::vector<double>> q;
};

/// P_u uniform; Q_u moves l1_distance/2 of mass from the other symbols onto
/// symbol 0, spread evenly (distance 0 gives Q_u = P_u).
CalibrationPoint make_uniform_point(std::size_t alphabet, std::size_t pairs, double eps2, double delta,
                                    double l1_distance);

/// Null and eps2-distance alternatives at n = 10 (U in {1, 2, 4}, delta = 0.1)
/// and at n = 2 (U in {1, 2, 3}, delta = 0.025, the per-state level of a
/// two-state regulatory test at delta = 0.1).
std::vector<CalibrationPoint> default_calibration_grid();

struct CalibrationOptions {
    std::vector<double> multipliers{0.25, 0.5, 1, 2, 4, 8, 16, 32, 64};
    double regime_ratio = 0.5;
    unsigned threads = 0;
};

struct CalibrationPointResult {
    std::uint64_t m = 0;
    double error = 0.0;
    double std_error = 0.0;
};

struct Calibration {
    double c = kDefaultThresholdConstant;
    double multiplier = kDefaultBudgetMultiplier;
    std::string grid_hash;
    double achieved_error = 0.0;
    /// Binomial standard error of the achieved error (not persisted).
    double achieved_error_se = 0.0;
    std::vector<CalibrationPointResult> points;

    SampleBudgetConstants constants(double regime_ratio = 0.5) const { return {multiplier, regime_ratio}; }
};

/// Stable hash of the grid's canonical JSON form.
std::string grid_hash(std::span<const CalibrationPoint> grid);

/// For each multiplier C in ascending order: simulate `trials` Poissonised
/// runs per grid point at m = required_m(point, C), then binary-search the
/// smallest c meeting every null point's error target and the largest c
/// meeting every alternative's. The first C with a non-empty interval wins and
/// c is its midpoint. Throws CalibrationFailed, reporting the gap, otherwise.
Calibration calibrate_constant(std::span<const CalibrationPoint> grid, std::size_t trials, std::uint64_t seed,
                               const CalibrationOptions& options = {});

void save_calibration(const Calibration& calibration, const std::filesystem::path& path);
Calibration load_calibration(const std::filesystem::path& path);

}  // namespace feedaudit
