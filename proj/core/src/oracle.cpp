#include "feedaudit/oracle.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

#include "feedaudit/error.hpp"
#include "feedaudit/parallel.hpp"

namespace feedaudit {

double linf_matrix_distance(const Matrix& a, const Matrix& b) {
    if (a.size() != b.size()) {
        throw Error(ErrorKind::DimensionMismatch,
                    std::to_string(a.size()) + "x" + std::to_string(a.size()) + " vs " + std::to_string(b.size()) +
                        "x" + std::to_string(b.size()));
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < a.size(); ++j) row += std::abs(a(i, j) - b(i, j));
        worst = std::max(worst, row);
    }
    return worst;
}

std::string_view to_string(Regime r) noexcept {
    switch (r) {
        case Regime::Null: return "null";
        case Regime::Alt: return "alt";
        case Regime::Gap: return "gap";
    }
    return "gap";
}

Regime classify_regime(double total_distance, std::size_t users, double eps1, double eps2) {
    const double u = static_cast<double>(users);
    if (total_distance <= u * eps1) return Regime::Null;
    if (total_distance >= u * eps2) return Regime::Alt;
    return Regime::Gap;
}

ScenarioTruth make_truth(std::vector<std::pair<Matrix, Matrix>> reference_filtered, double eps1, double eps2) {
    if (reference_filtered.empty()) throw Error(ErrorKind::InvalidArgument, "truth needs at least one user");
    ScenarioTruth truth;
    truth.eps1 = eps1;
    truth.eps2 = eps2;
    for (auto& [reference, filtered] : reference_filtered) {
        UserTruth user{std::move(reference), std::move(filtered), 0.0};
        user.distance = linf_matrix_distance(user.reference, user.filtered);
        truth.total_distance += user.distance;
        truth.users.push_back(std::move(user));
    }
    truth.regime = classify_regime(truth.total_distance, truth.users.size(), eps1, eps2);
    return truth;
}

double total_filter_variability(const ScenarioTruth& truth) {
    if (truth.users.empty()) throw Error(ErrorKind::InvalidArgument, "truth has no users");
    double sum = 0.0;
    for (const auto& u : truth.users) sum += linf_matrix_distance(u.reference, u.filtered);
    return sum / static_cast<double>(truth.users.size());
}

YesRate estimate_yes_rate(std::size_t trials, std::uint64_t seed, const std::function<Decision(std::uint64_t)>& trial,
                          unsigned threads) {
    if (trials == 0) throw Error(ErrorKind::InvalidArgument, "need at least one trial");
    std::vector<char> yes(trials, 0);
    parallel_for(
        trials, [&](std::size_t t) { yes[t] = trial(derive_seed(seed, {stream::trial, t})) == Decision::Yes; },
        threads);
    YesRate r;
    r.trials = trials;
    for (char y : yes) r.yes += static_cast<std::size_t>(y);
    r.rate = static_cast<double>(r.yes) / static_cast<double>(trials);
    r.std_error = std::sqrt(r.rate * (1.0 - r.rate) / static_cast<double>(trials));
    return r;
}

YesRate verdict_probability(const ScenarioTruth& truth, const RegulatoryPipeline& pipeline, std::size_t trials,
                            std::uint64_t seed, unsigned threads) {
    if (trials < 100) throw Error(ErrorKind::InvalidArgument, "verdict probability needs at least 100 trials");
    std::vector<ChainPair> chains;
    for (const auto& u : truth.users) chains.push_back({validate_chain(u.reference), validate_chain(u.filtered)});
    return estimate_yes_rate(
        trials, seed,
        [&](std::uint64_t trial_seed) {
            std::vector<FeedBatch> filtered, reference;
            for (std::size_t u = 0; u < chains.size(); ++u) {
                filtered.push_back(simulate_batch(chains[u].filtered, u, World::Filtered, pipeline.walks,
                                                  pipeline.horizon, derive_seed(trial_seed, {stream::feeds, u, 0})));
                reference.push_back(simulate_batch(chains[u].reference, u, World::Reference, pipeline.walks,
                                                   pipeline.horizon, derive_seed(trial_seed, {stream::feeds, u, 1})));
            }
            RegulatoryConfig config = pipeline.config;
            config.seed = derive_seed(trial_seed, stream::regulatory);
            return regulatory_tester(filtered, reference, config).decision;
        },
        threads);
}

GMoments empirical_g_moments(std::span<const double> p, std::span<const double> q, double m, std::size_t trials,
                             std::uint64_t seed) {
    if (p.size() != q.size()) throw Error(ErrorKind::DimensionMismatch, "p and q differ in length");
    if (trials < 10000) throw Error(ErrorKind::InvalidArgument, "G moments need at least 10^4 trials");
    const std::size_t n = p.size();
    GMoments moments;
    moments.mean.resize(n);
    moments.variance.resize(n);
    moments.mean_se.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        Rng rng = make_rng(derive_seed(seed, i));
        std::poisson_distribution<std::int64_t> v_dist(m * p[i]);
        std::poisson_distribution<std::int64_t> y_dist(m * q[i]);
        // Welford keeps the variance stable when the mean is large.
        double mean = 0.0, m2 = 0.0;
        for (std::size_t t = 0; t < trials; ++t) {
            const double v = p[i] > 0.0 ? static_cast<double>(v_dist(rng)) : 0.0;
            const double y = q[i] > 0.0 ? static_cast<double>(y_dist(rng)) : 0.0;
            const double g = (v - y) * (v - y) - v - y;
            const double d = g - mean;
            mean += d / static_cast<double>(t + 1);
            m2 += d * (g - mean);
        }
        moments.mean[i] = mean;
        moments.variance[i] = m2 / static_cast<double>(trials - 1);
        moments.mean_se[i] = std::sqrt(moments.variance[i] / static_cast<double>(trials));
    }
    return moments;
}

bool PluginEstimate::any_uncovered() const {
    for (bool u : uncovered) {
        if (u) return true;
    }
    return false;
}

PluginEstimate plugin_chain_estimate(const FeedBatch& batch, std::size_t n) {
    batch.validate(n);
    Matrix counts(n);
    for (const auto& traj : batch.trajectories) {
        for (std::size_t t = 0; t + 1 < traj.states.size(); ++t) counts(traj.states[t], traj.states[t + 1]) += 1.0;
    }
    PluginEstimate est{Matrix(n), std::vector<bool>(n, false)};
    for (std::size_t i = 0; i < n; ++i) {
        double total = 0.0;
        for (double c : counts.row(i)) total += c;
        if (total == 0.0) {
            est.uncovered[i] = true;
            continue;
        }
        for (std::size_t j = 0; j < n; ++j) est.transitions(i, j) = counts(i, j) / total;
    }
    return est;
}

std::string format_csv_row(const ResultRow& row) {
    std::ostringstream out;
    out << std::setprecision(17) << row.scenario_id << ',' << row.tester << ',' << row.trials << ',' << row.yes_rate
        << ',' << row.se << ',' << row.seed;
    return out.str();
}

void append_results_csv(const std::filesystem::path& path, std::span<const ResultRow> rows) {
    std::error_code ec;
    const bool fresh = !std::filesystem::exists(path, ec) || std::filesystem::file_size(path, ec) == 0;
    std::ofstream out(path, std::ios::app);
    if (!out) throw Error(ErrorKind::Io, "cannot open " + path.string());
    if (fresh) out << "scenario_id,tester,trials,yes_rate,se,seed\n";
    for (const auto& row : rows) out << format_csv_row(row) << '\n';
    if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

}  // namespace feedaudit
