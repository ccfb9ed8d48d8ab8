#include "feedaudit/iid_tester.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <nlohmann/json.hpp>
#include <sstream>

#include "feedaudit/content_hash.hpp"
#include "feedaudit/error.hpp"
#include "feedaudit/parallel.hpp"

namespace feedaudit {

using nlohmann::json;

std::string_view to_string(Decision d) noexcept { return d == Decision::Yes ? "YES" : "NO"; }

void IIDTestConfig::validate() const {
    if (pairs == 0) throw Error(ErrorKind::InvalidArgument, "need at least one pair");
    if (alphabet == 0) throw Error(ErrorKind::InvalidArgument, "alphabet must be non-empty");
    if (!(eps1 >= 0.0) || !(eps2 >= 0.0)) throw Error(ErrorKind::InvalidArgument, "eps1 and eps2 must be non-negative");
    if (!(eps1 < eps2)) throw Error(ErrorKind::InvalidArgument, "eps1 must be strictly below eps2");
    if (!(delta > 0.0 && delta < 1.0)) throw Error(ErrorKind::InvalidArgument, "delta must lie in (0,1)");
    if (!(c > 0.0)) throw Error(ErrorKind::InvalidArgument, "threshold constant c must be positive");
}

namespace {

std::uint64_t draw_poisson(double mean, Rng& rng) {
    if (mean <= 0.0) return 0;
    std::poisson_distribution<std::uint64_t> poisson(mean);
    return poisson(rng);
}

std::vector<std::uint64_t> tabulate(std::span<const State> symbols, std::size_t n) {
    std::vector<std::uint64_t> counts(n, 0);
    for (State s : symbols) {
        if (s >= n) throw Error(ErrorKind::InvalidArgument, "symbol " + std::to_string(s) + " outside alphabet");
        ++counts[s];
    }
    return counts;
}

}  // namespace

HalfCounts build_counts(std::span<const State> first_half, std::span<const State> second_half,
                        const IIDTestConfig& config, Rng& rng) {
    const std::uint64_t m = config.m;
    if (first_half.size() < m || second_half.size() < m) {
        throw Error(ErrorKind::InsufficientSamples, "each half needs at least " + std::to_string(m) + " samples");
    }
    HalfCounts out;
    auto take = [&](std::span<const State> half, std::uint64_t& draw) {
        draw = config.poissonize ? draw_poisson(static_cast<double>(m), rng) : m;
        const std::size_t used = static_cast<std::size_t>(std::min<std::uint64_t>(draw, half.size()));
        if (draw > half.size()) out.truncated = true;
        return tabulate(half.first(used), config.alphabet);
    };
    out.primary = take(first_half, out.primary_draw);
    out.auxiliary = take(second_half, out.auxiliary_draw);
    return out;
}

std::vector<double> f_hat(const SampleCounts& counts, std::uint64_t m, std::size_t n) {
    std::vector<double> weights(n, 1.0);
    const double md = static_cast<double>(m);
    const double nd = static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double v = static_cast<double>(counts.p.auxiliary[i]);
        const double y = static_cast<double>(counts.q.auxiliary[i]);
        if (m > n) {
            const double scale = md / nd;
            weights[i] = std::max({std::abs(v - y) / std::sqrt(scale), (v + y) / scale, 1.0});
        } else {
            weights[i] = std::max(v + y, 1.0);
        }
    }
    return weights;
}

GStatistic g_statistic(std::span<const SampleCounts> counts, std::span<const std::vector<double>> weights) {
    if (counts.size() != weights.size()) throw Error(ErrorKind::DimensionMismatch, "one weight vector per pair");
    GStatistic g;
    for (std::size_t u = 0; u < counts.size(); ++u) {
        const auto& v = counts[u].p.primary;
        const auto& y = counts[u].q.primary;
        const std::size_t n = v.size();
        if (y.size() != n || weights[u].size() != n) throw Error(ErrorKind::DimensionMismatch, "alphabet sizes differ");
        std::vector<double> raw(n), terms(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double vi = static_cast<double>(v[i]);
            const double yi = static_cast<double>(y[i]);
            raw[i] = (vi - yi) * (vi - yi) - vi - yi;
            terms[i] = raw[i] / weights[u][i];
            g.total += terms[i];
        }
        g.raw.push_back(std::move(raw));
        g.terms.push_back(std::move(terms));
        g.f_hat.push_back(weights[u]);
    }
    return g;
}

GStatistic g_statistic(std::span<const SampleCounts> counts, const IIDTestConfig& config) {
    std::vector<std::vector<double>> weights;
    weights.reserve(counts.size());
    for (const auto& c : counts) weights.push_back(f_hat(c, config.m, config.alphabet));
    return g_statistic(counts, weights);
}

double threshold(const IIDTestConfig& config) {
    const double m = static_cast<double>(config.m);
    const double n = static_cast<double>(config.alphabet);
    const double u = static_cast<double>(config.pairs);
    const double first = std::pow(m, 1.5) * config.eps2 / std::sqrt(n);
    const double second = u * m * m * config.eps2 * config.eps2 / n;
    return config.c * std::min(first, second);
}

IIDVerdict decide(std::vector<SampleCounts> counts, const IIDTestConfig& config) {
    config.validate();
    if (counts.size() != config.pairs) {
        throw Error(ErrorKind::DimensionMismatch,
                    "expected " + std::to_string(config.pairs) + " pairs, got " + std::to_string(counts.size()));
    }
    IIDVerdict verdict;
    verdict.statistic = g_statistic(counts, config);
    verdict.threshold = threshold(config);
    verdict.decision = verdict.statistic.total < verdict.threshold ? Decision::Yes : Decision::No;
    verdict.truncated = std::any_of(counts.begin(), counts.end(),
                                    [](const SampleCounts& c) { return c.p.truncated || c.q.truncated; });
    verdict.counts = std::move(counts);
    return verdict;
}

IIDVerdict iid_tester(std::span<const SampleSet> p_sets, std::span<const SampleSet> q_sets,
                      const IIDTestConfig& config, std::uint64_t seed) {
    config.validate();
    if (p_sets.size() != config.pairs || q_sets.size() != config.pairs) {
        throw Error(ErrorKind::DimensionMismatch, "need one P and one Q sample set per pair");
    }
    std::vector<SampleCounts> counts(config.pairs);
    for (std::size_t u = 0; u < config.pairs; ++u) {
        Rng p_rng = make_rng(derive_seed(seed, {stream::iid, u, 0}));
        Rng q_rng = make_rng(derive_seed(seed, {stream::iid, u, 1}));
        counts[u].p = build_counts(p_sets[u].first_half, p_sets[u].second_half, config, p_rng);
        counts[u].q = build_counts(q_sets[u].first_half, q_sets[u].second_half, config, q_rng);
        counts[u].nominal_m = config.m;
    }
    return decide(std::move(counts), config);
}

std::uint64_t required_m(double alphabet, std::size_t pairs, double eps1, double eps2, double delta,
                         const SampleBudgetConstants& constants) {
    if (!(alphabet > 0.0) || pairs == 0) throw Error(ErrorKind::InvalidArgument, "alphabet and pairs must be positive");
    if (!(eps2 > 0.0 && eps2 <= 1.0)) throw Error(ErrorKind::InvalidArgument, "eps2 must lie in (0,1]");
    if (!(delta > 0.0 && delta < 1.0)) throw Error(ErrorKind::InvalidArgument, "delta must lie in (0,1)");
    if (!(eps1 >= 0.0)) throw Error(ErrorKind::InvalidArgument, "eps1 must be non-negative");
    if (eps1 > constants.regime_ratio * eps2) {
        throw Error(ErrorKind::RegimeViolation, "eps1 = " + std::to_string(eps1) + " exceeds " +
                                                    std::to_string(constants.regime_ratio) + " * eps2");
    }
    const double n = alphabet;
    const double u = static_cast<double>(pairs);
    const double e2sq = eps2 * eps2;
    const double terms = std::sqrt(n / (e2sq * e2sq * delta * u)) + n * eps1 * eps1 / (e2sq * e2sq) +
                         n * eps1 / e2sq + std::pow(n, 2.0 / 3.0) / (u * std::pow(eps2, 4.0 / 3.0));
    return static_cast<std::uint64_t>(std::ceil(constants.multiplier * terms));
}

// ---------------------------------------------------------------------------

CalibrationPoint make_uniform_point(std::size_t alphabet, std::size_t pairs, double eps2, double delta,
                                    double l1_distance) {
    if (alphabet < 2) throw Error(ErrorKind::InvalidArgument, "calibration alphabet needs two symbols");
    const double base = 1.0 / static_cast<double>(alphabet);
    const double shift = l1_distance / 2.0;
    const double take = shift / static_cast<double>(alphabet - 1);
    if (take > base + 1e-12) throw Error(ErrorKind::InvalidArgument, "distance too large for a uniform base");
    CalibrationPoint point;
    point.alphabet = alphabet;
    point.pairs = pairs;
    point.eps2 = eps2;
    point.delta = delta;
    point.null_instance = l1_distance == 0.0;
    std::vector<double> p(alphabet, base);
    std::vector<double> q(alphabet, std::max(0.0, base - take));
    q[0] = base + shift;
    point.p.assign(pairs, p);
    point.q.assign(pairs, q);
    return point;
}

std::vector<CalibrationPoint> default_calibration_grid() {
    std::vector<CalibrationPoint> grid;
    for (std::size_t u : {1, 2, 4}) {
        grid.push_back(make_uniform_point(10, u, 0.5, 0.1, 0.0));
        grid.push_back(make_uniform_point(10, u, 0.5, 0.1, 0.5));
    }
    for (std::size_t u : {1, 2, 3}) {
        grid.push_back(make_uniform_point(2, u, 0.5, 0.025, 0.0));
        grid.push_back(make_uniform_point(2, u, 0.5, 0.025, 0.5));
    }
    return grid;
}

std::string grid_hash(std::span<const CalibrationPoint> grid) {
    json points = json::array();
    for (const auto& pt : grid) {
        points.push_back({{"n", pt.alphabet},
                          {"U", pt.pairs},
                          {"eps1", pt.eps1},
                          {"eps2", pt.eps2},
                          {"delta", pt.delta},
                          {"null", pt.null_instance},
                          {"p", pt.p},
                          {"q", pt.q}});
    }
    return sha1_hex(points.dump());
}

namespace {

HalfCounts poissonized_counts(std::span<const double> cumulative, std::uint64_t m, Rng& rng) {
    const std::size_t n = cumulative.size();
    HalfCounts h;
    h.primary.assign(n, 0);
    h.auxiliary.assign(n, 0);
    h.primary_draw = draw_poisson(static_cast<double>(m), rng);
    for (std::uint64_t s = 0; s < h.primary_draw; ++s) ++h.primary[sample_cumulative(cumulative, rng)];
    h.auxiliary_draw = draw_poisson(static_cast<double>(m), rng);
    for (std::uint64_t s = 0; s < h.auxiliary_draw; ++s) ++h.auxiliary[sample_cumulative(cumulative, rng)];
    return h;
}

// G / tau_1 per trial, where tau_1 is the threshold at c = 1.
std::vector<double> simulate_ratios(const CalibrationPoint& point, std::uint64_t m, std::size_t trials,
                                    std::uint64_t seed, unsigned threads) {
    IIDTestConfig config;
    config.pairs = point.pairs;
    config.alphabet = point.alphabet;
    config.m = m;
    config.eps1 = point.eps1;
    config.eps2 = point.eps2;
    config.delta = point.delta;
    config.c = 1.0;
    const double unit_tau = threshold(config);
    std::vector<std::vector<double>> p_cum, q_cum;
    for (std::size_t u = 0; u < point.pairs; ++u) {
        p_cum.push_back(prefix_sums(point.p[u]));
        q_cum.push_back(prefix_sums(point.q[u]));
    }
    std::vector<double> ratios(trials);
    parallel_for(
        trials,
        [&](std::size_t t) {
            Rng rng = make_rng(derive_seed(seed, {stream::trial, t}));
            std::vector<SampleCounts> counts(point.pairs);
            for (std::size_t u = 0; u < point.pairs; ++u) {
                counts[u].p = poissonized_counts(p_cum[u], m, rng);
                counts[u].q = poissonized_counts(q_cum[u], m, rng);
                counts[u].nominal_m = m;
            }
            ratios[t] = g_statistic(counts, config).total / unit_tau;
        },
        threads);
    std::sort(ratios.begin(), ratios.end());
    return ratios;
}

double null_error(const std::vector<double>& sorted, double c) {
    auto it = std::lower_bound(sorted.begin(), sorted.end(), c);  // first r >= c
    return static_cast<double>(sorted.end() - it) / static_cast<double>(sorted.size());
}

double alt_error(const std::vector<double>& sorted, double c) {
    auto it = std::lower_bound(sorted.begin(), sorted.end(), c);  // count r < c
    return static_cast<double>(it - sorted.begin()) / static_cast<double>(sorted.size());
}

template <typename Pred>
double bisect(double lo, double hi, Pred pred_hi_side) {
    // pred is false at lo and true at hi; returns the boundary.
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        (pred_hi_side(mid) ? hi : lo) = mid;
    }
    return hi;
}

double smoothed_se(double error, std::size_t trials) {
    const double t = static_cast<double>(trials);
    const double p = (error * t + 0.5) / (t + 1.0);
    return std::sqrt(p * (1.0 - p) / t);
}

}  // namespace

Calibration calibrate_constant(std::span<const CalibrationPoint> grid, std::size_t trials, std::uint64_t seed,
                               const CalibrationOptions& options) {
    const bool has_null = std::any_of(grid.begin(), grid.end(), [](const auto& p) { return p.null_instance; });
    const bool has_alt = std::any_of(grid.begin(), grid.end(), [](const auto& p) { return !p.null_instance; });
    if (!has_null || !has_alt) throw Error(ErrorKind::InvalidArgument, "grid needs null and alternative points");
    if (trials == 0) throw Error(ErrorKind::InvalidArgument, "trials must be positive");

    double last_gap = std::numeric_limits<double>::infinity();
    for (std::size_t ci = 0; ci < options.multipliers.size(); ++ci) {
        const double multiplier = options.multipliers[ci];
        const SampleBudgetConstants constants{multiplier, options.regime_ratio};
        std::vector<std::vector<double>> ratios(grid.size());
        std::vector<std::uint64_t> ms(grid.size());
        for (std::size_t g = 0; g < grid.size(); ++g) {
            const auto& pt = grid[g];
            ms[g] = required_m(static_cast<double>(pt.alphabet), pt.pairs, pt.eps1, pt.eps2, pt.delta, constants);
            ratios[g] = simulate_ratios(pt, ms[g], trials, derive_seed(seed, {stream::calibration, ci, g}),
                                        options.threads);
        }
        double hi = 1.0;
        for (const auto& r : ratios) hi = std::max(hi, r.back() + 1.0);

        auto null_ok = [&](double c) {
            for (std::size_t g = 0; g < grid.size(); ++g) {
                if (grid[g].null_instance && null_error(ratios[g], c) > grid[g].delta) return false;
            }
            return true;
        };
        auto alt_bad = [&](double c) {
            for (std::size_t g = 0; g < grid.size(); ++g) {
                if (!grid[g].null_instance && alt_error(ratios[g], c) > grid[g].delta) return true;
            }
            return false;
        };
        const double tiny = 1e-9;
        const double c_null = null_ok(tiny) ? tiny : bisect(tiny, hi, null_ok);
        const double c_alt = alt_bad(hi) ? (alt_bad(tiny) ? 0.0 : bisect(tiny, hi, alt_bad)) : hi;
        // c_alt is the first c where some alternative misses its target; strictly below it is fine.
        if (c_null < c_alt) {
            Calibration result;
            result.c = 0.5 * (c_null + c_alt);
            result.multiplier = multiplier;
            result.grid_hash = grid_hash(grid);
            for (std::size_t g = 0; g < grid.size(); ++g) {
                const double err = grid[g].null_instance ? null_error(ratios[g], result.c)
                                                         : alt_error(ratios[g], result.c);
                result.points.push_back({ms[g], err, smoothed_se(err, trials)});
                result.achieved_error = std::max(result.achieved_error, err);
            }
            result.achieved_error_se = smoothed_se(result.achieved_error, trials);
            return result;
        }
        last_gap = c_null - c_alt;
    }
    std::ostringstream msg;
    msg << "no threshold constant separates the grid; at the largest multiplier the null boundary exceeds the "
           "alternative boundary by "
        << last_gap;
    throw Error(ErrorKind::CalibrationFailed, msg.str());
}

void save_calibration(const Calibration& calibration, const std::filesystem::path& path) {
    json j = {{"c", calibration.c},
              {"C", calibration.multiplier},
              {"grid_hash", calibration.grid_hash},
              {"achieved_error", calibration.achieved_error}};
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
    out << j.dump(2) << '\n';
}

Calibration load_calibration(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot read " + path.string());
    try {
        const json j = json::parse(in);
        Calibration c;
        c.c = j.at("c").get<double>();
        c.multiplier = j.at("C").get<double>();
        c.grid_hash = j.at("grid_hash").get<std::string>();
        c.achieved_error = j.at("achieved_error").get<double>();
        return c;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::ConfigInvalid, path.string() + ": " + e.what());
    }
}

}  // namespace feedaudit
