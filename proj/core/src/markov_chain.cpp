#include "feedaudit/markov_chain.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "feedaudit/error.hpp"
#include "feedaudit/parallel.hpp"

namespace feedaudit {

Matrix Matrix::from_rows(const std::vector<std::vector<double>>& rows) {
    const std::size_t n = rows.size();
    if (n == 0) throw Error(ErrorKind::InvalidArgument, "matrix must have at least one row");
    Matrix m(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (rows[i].size() != n) {
            throw Error(ErrorKind::InvalidArgument,
                        "row " + std::to_string(i) + " has " + std::to_string(rows[i].size()) +
                            " entries, expected " + std::to_string(n));
        }
        std::copy(rows[i].begin(), rows[i].end(), m.row(i).begin());
    }
    return m;
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

std::vector<std::vector<double>> Matrix::to_rows() const {
    std::vector<std::vector<double>> rows(n_);
    for (std::size_t i = 0; i < n_; ++i) rows[i].assign(row(i).begin(), row(i).end());
    return rows;
}

Matrix multiply(const Matrix& a, const Matrix& b) {
    if (a.size() != b.size()) throw Error(ErrorKind::DimensionMismatch, "matrix sizes differ");
    const std::size_t n = a.size();
    Matrix c(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t l = 0; l < n; ++l) {
            const double ail = a(i, l);
            if (ail == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) c(i, j) += ail * b(l, j);
        }
    }
    return c;
}

std::vector<double> left_multiply(std::span<const double> x, const Matrix& m) {
    const std::size_t n = m.size();
    std::vector<double> y(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (x[i] == 0.0) continue;
        for (std::size_t j = 0; j < n; ++j) y[j] += x[i] * m(i, j);
    }
    return y;
}

bool is_irreducible(const Matrix& m) {
    const std::size_t n = m.size();
    // Strongly connected iff state 0 reaches everything in the graph and in its transpose.
    auto reaches_all = [&](bool transpose) {
        std::vector<char> seen(n, 0);
        std::vector<std::size_t> stack{0};
        seen[0] = 1;
        std::size_t visited = 1;
        while (!stack.empty()) {
            const std::size_t v = stack.back();
            stack.pop_back();
            for (std::size_t w = 0; w < n; ++w) {
                const double p = transpose ? m(w, v) : m(v, w);
                if (p > 0.0 && !seen[w]) {
                    seen[w] = 1;
                    ++visited;
                    stack.push_back(w);
                }
            }
        }
        return visited == n;
    };
    return reaches_all(false) && reaches_all(true);
}

std::vector<double> prefix_sums(std::span<const double> probs) {
    std::vector<double> cumulative(probs.size());
    std::partial_sum(probs.begin(), probs.end(), cumulative.begin());
    return cumulative;
}

State sample_cumulative(std::span<const double> cumulative, Rng& rng) {
    const double u = uniform01(rng) * cumulative.back();
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    // upper_bound never lands on a zero-probability entry.
    if (it == cumulative.end()) --it;
    return static_cast<State>(it - cumulative.begin());
}

MarkovChain::MarkovChain(Matrix m) : matrix_(std::move(m)) {
    const std::size_t n = matrix_.size();
    cumulative_.resize(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        auto sums = prefix_sums(matrix_.row(i));
        std::copy(sums.begin(), sums.end(), cumulative_.begin() + static_cast<std::ptrdiff_t>(i * n));
    }
}

State MarkovChain::sample_next(State from, Rng& rng) const {
    const std::size_t n = num_states();
    return sample_cumulative(std::span<const double>(cumulative_.data() + from * n, n), rng);
}

MarkovChain validate_chain(const Matrix& rows) {
    const std::size_t n = rows.size();
    if (n == 0) throw Error(ErrorKind::InvalidArgument, "chain needs at least one state");
    Matrix m = rows;
    for (std::size_t i = 0; i < n; ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double p = m(i, j);
            if (!std::isfinite(p)) {
                throw Error(ErrorKind::InvalidArgument,
                            "entry (" + std::to_string(i) + "," + std::to_string(j) + ") is not finite");
            }
            if (p < 0.0) {
                throw Error(ErrorKind::NegativeEntry,
                            "entry (" + std::to_string(i) + "," + std::to_string(j) + ") is negative");
            }
            sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-9) {
            throw Error(ErrorKind::NotStochastic,
                        "row " + std::to_string(i) + " sums to " + std::to_string(sum));
        }
        for (double& p : m.row(i)) p /= sum;
    }
    if (!is_irreducible(m)) throw Error(ErrorKind::NotIrreducible, "positive-entry graph is not strongly connected");
    return MarkovChain(std::move(m));
}

MarkovChain validate_chain(const std::vector<std::vector<double>>& rows) {
    return validate_chain(Matrix::from_rows(rows));
}

Trajectory simulate_trajectory(const MarkovChain& chain, State start, std::size_t length, Rng& rng) {
    if (start >= chain.num_states()) throw Error(ErrorKind::InvalidArgument, "start state out of range");
    if (length == 0) throw Error(ErrorKind::InvalidArgument, "trajectory length must be positive");
    Trajectory traj;
    traj.states.reserve(length);
    traj.states.push_back(start);
    for (std::size_t t = 1; t < length; ++t) traj.states.push_back(chain.sample_next(traj.states.back(), rng));
    return traj;
}

Trajectory simulate_trajectory(const MarkovChain& chain, State start, std::size_t length, std::uint64_t seed) {
    Rng rng = make_rng(seed);
    return simulate_trajectory(chain, start, length, rng);
}

CountingMeasure CountingMeasure::of(std::span<const State> prefix, std::size_t n) {
    CountingMeasure measure(n);
    for (State s : prefix) measure.add(s);
    return measure;
}

namespace {

double l1_distance(std::span<const double> a, std::span<const double> b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d += std::abs(a[i] - b[i]);
    return d;
}

std::vector<double> normalized(std::vector<double> v) {
    const double sum = std::accumulate(v.begin(), v.end(), 0.0);
    for (double& x : v) x /= sum;
    return v;
}

}  // namespace

std::vector<double> stationary_distribution(const MarkovChain& chain, double tol, std::size_t max_iterations) {
    const std::size_t n = chain.num_states();
    const Matrix& m = chain.matrix();
    std::vector<double> prev;
    std::vector<double> cur(n, 1.0 / static_cast<double>(n));
    for (std::size_t it = 0; it < max_iterations; ++it) {
        std::vector<double> next = left_multiply(cur, m);
        if (l1_distance(next, cur) <= tol) return normalized(std::move(cur));
        // Residual of (prev + cur) / 2 is ||next - prev||_1 / 2.
        if (!prev.empty() && 0.5 * l1_distance(next, prev) <= tol) {
            std::vector<double> avg(n);
            for (std::size_t i = 0; i < n; ++i) avg[i] = 0.5 * (prev[i] + cur[i]);
            return normalized(std::move(avg));
        }
        prev = std::move(cur);
        cur = std::move(next);
    }
    throw Error(ErrorKind::NoConvergence,
                "power iteration did not reach tolerance in " + std::to_string(max_iterations) + " iterations");
}

std::uint64_t mixing_time_estimate(const MarkovChain& chain, std::uint64_t cap) {
    const std::vector<double> pi = stationary_distribution(chain);
    const Matrix& m = chain.matrix();
    const std::size_t n = chain.num_states();
    Matrix power = m;
    for (std::uint64_t t = 1; t <= cap; ++t) {
        double worst = 0.0;
        for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, 0.5 * l1_distance(power.row(i), pi));
        if (worst <= 0.25) return t;
        power = multiply(power, m);
    }
    throw Error(ErrorKind::CapExceeded, "no mixing within " + std::to_string(cap) + " steps");
}

std::uint64_t joint_k_cover_stop(std::span<const Trajectory> walks, std::size_t n, std::uint64_t k,
                                 std::uint64_t budget) {
    if (walks.empty()) throw Error(ErrorKind::InvalidArgument, "need at least one walk");
    if (k == 0) throw Error(ErrorKind::InvalidArgument, "k must be positive");
    std::vector<std::uint64_t> counts(n, 0);
    std::size_t uncovered = n;
    std::size_t longest = 0;
    for (const auto& w : walks) longest = std::max(longest, w.length());
    for (std::uint64_t t = 1; t <= budget && t <= longest; ++t) {
        for (const auto& w : walks) {
            if (t > w.length()) continue;
            const State s = w.states[t - 1];
            if (s >= n) throw Error(ErrorKind::InvalidArgument, "state label out of range");
            if (++counts[s] == k) --uncovered;
        }
        if (uncovered == 0) return t;
    }
    throw Error(ErrorKind::BudgetExceeded, "walks did not jointly cover every state " + std::to_string(k) + " times");
}

std::uint64_t joint_k_cover_stop(const MarkovChain& chain, std::span<const State> starts, std::uint64_t k, Rng& rng,
                                 std::uint64_t budget) {
    if (starts.empty()) throw Error(ErrorKind::InvalidArgument, "need at least one walk");
    if (k == 0) throw Error(ErrorKind::InvalidArgument, "k must be positive");
    const std::size_t n = chain.num_states();
    std::vector<std::uint64_t> counts(n, 0);
    std::vector<State> position(starts.begin(), starts.end());
    std::size_t uncovered = n;
    for (State s : position) {
        if (s >= n) throw Error(ErrorKind::InvalidArgument, "start state out of range");
        if (++counts[s] == k) --uncovered;
    }
    std::uint64_t t = 1;
    while (uncovered != 0) {
        if (t >= budget) throw Error(ErrorKind::BudgetExceeded, "cover time exceeded budget " + std::to_string(budget));
        ++t;
        for (State& s : position) {
            s = chain.sample_next(s, rng);
            if (++counts[s] == k) --uncovered;
        }
    }
    return t;
}

CoverTimeEstimate estimate_cover_time(const MarkovChain& chain, std::uint64_t walks, std::uint64_t k,
                                      std::size_t trials, std::uint64_t seed, const CoverTimeOptions& options) {
    if (trials < 100) throw Error(ErrorKind::InvalidArgument, "cover-time estimation needs at least 100 trials");
    if (walks == 0 || k == 0) throw Error(ErrorKind::InvalidArgument, "walks and k must be positive");
    const std::size_t n = chain.num_states();
    const std::vector<double> pi_cumulative = prefix_sums(stationary_distribution(chain));
    const std::size_t num_profiles = n + 1;

    std::vector<std::uint64_t> samples(num_profiles * trials);
    parallel_for(
        num_profiles * trials,
        [&](std::size_t idx) {
            const std::size_t profile = idx / trials;
            const std::size_t trial = idx % trials;
            Rng rng = make_rng(derive_seed(seed, {stream::cover_time, profile, trial}));
            std::vector<State> starts(walks);
            for (auto& s : starts) {
                s = profile < n ? static_cast<State>(profile) : sample_cumulative(pi_cumulative, rng);
            }
            samples[idx] = joint_k_cover_stop(chain, starts, k, rng, options.budget);
        },
        options.threads);

    CoverTimeEstimate estimate;
    estimate.walks = walks;
    estimate.k = k;
    estimate.trials = trials;
    for (std::size_t p = 0; p < num_profiles; ++p) {
        std::span<const std::uint64_t> s(samples.data() + p * trials, trials);
        double mean = 0.0;
        for (auto v : s) mean += static_cast<double>(v);
        mean /= static_cast<double>(trials);
        double var = 0.0;
        for (auto v : s) var += (static_cast<double>(v) - mean) * (static_cast<double>(v) - mean);
        var /= static_cast<double>(trials - 1);
        CoverTimeProfile profile;
        if (p < n) profile.start = static_cast<State>(p);
        profile.mean = mean;
        profile.std_error = std::sqrt(var / static_cast<double>(trials));
        if (options.keep_samples) profile.samples.assign(s.begin(), s.end());
        estimate.profiles.push_back(std::move(profile));
    }
    for (std::size_t p = 1; p < num_profiles; ++p) {
        if (estimate.profiles[p].mean > estimate.profiles[estimate.worst_profile].mean) estimate.worst_profile = p;
    }
    return estimate;
}

std::uint64_t successor_bearing_visits(std::span<const Trajectory> trajectories, State state) {
    std::uint64_t visits = 0;
    for (const auto& traj : trajectories) {
        if (traj.states.size() < 2) continue;
        visits += static_cast<std::uint64_t>(std::count(traj.states.begin(), traj.states.end() - 1, state));
    }
    return visits;
}

std::vector<State> extract_successors(std::span<const Trajectory> trajectories, State state, std::size_t count) {
    std::vector<State> out;
    out.reserve(count);
    for (const auto& traj : trajectories) {
        for (std::size_t t = 0; t + 1 < traj.states.size() && out.size() < count; ++t) {
            if (traj.states[t] == state) out.push_back(traj.states[t + 1]);
        }
        if (out.size() == count) return out;
    }
    if (out.size() < count) {
        throw Error(ErrorKind::InsufficientCoverage, "state " + std::to_string(state) + " has " +
                                                         std::to_string(out.size()) + " successors, need " +
                                                         std::to_string(count));
    }
    return out;
}

ChainDiagnostics diagnose_chain(const MarkovChain& chain, std::span<const CoverRequest> requests, std::size_t trials,
                                std::uint64_t seed) {
    ChainDiagnostics diag;
    diag.stationary = stationary_distribution(chain);
    diag.pi_star = *std::min_element(diag.stationary.begin(), diag.stationary.end());
    try {
        diag.t_mix_hat = mixing_time_estimate(chain);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::CapExceeded) throw;
    }
    for (std::size_t r = 0; r < requests.size(); ++r) {
        const auto est = estimate_cover_time(chain, requests[r].walks, requests[r].k, trials, derive_seed(seed, r));
        diag.cover.push_back({requests[r].k, requests[r].walks, est.value(), est.std_error()});
    }
    return diag;
}

}  // namespace feedaudit
