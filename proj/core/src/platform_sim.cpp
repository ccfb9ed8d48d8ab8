#include "feedaudit/platform_sim.hpp"

#include <string>

#include "feedaudit/error.hpp"
#include "feedaudit/parallel.hpp"
#include "feedaudit/rng.hpp"

namespace feedaudit {

namespace {

// Tolerance for targets that sit on the feasibility boundary up to rounding.
constexpr double kGapSlack = 1e-12;

struct Perturbation {
    State row = 0;
    State target = 0;
};

Matrix uniform_matrix(std::size_t n) { return Matrix(n, 1.0 / static_cast<double>(n)); }

Matrix lazify(const Matrix& m, double s) {
    Matrix out(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) {
        for (std::size_t j = 0; j < m.size(); ++j) out(i, j) = (1.0 - s) * m(i, j) + (i == j ? s : 0.0);
    }
    return out;
}

ScenarioUser build_user(const ScenarioSpec& spec, double gap, Perturbation where, bool adversarial) {
    if (gap > spec.max_gap() + kGapSlack) {
        throw Error(ErrorKind::InfeasibleGap, "gap " + std::to_string(gap) + " exceeds the feasible maximum " +
                                                  std::to_string(spec.max_gap()));
    }
    const std::size_t n = spec.states;
    const double base_gap = std::min(gap / (1.0 - spec.self_loop), 2.0 * static_cast<double>(n - 1) / static_cast<double>(n));
    Matrix reference = uniform_matrix(n);
    Matrix filtered = reference;
    const double take = base_gap / (2.0 * static_cast<double>(n - 1));
    for (std::size_t j = 0; j < n; ++j) {
        filtered(where.row, j) += j == where.target ? base_gap / 2.0 : -take;
        filtered(where.row, j) = std::max(filtered(where.row, j), 0.0);
    }
    ScenarioUser user{validate_chain(lazify(reference, spec.self_loop)), validate_chain(lazify(filtered, spec.self_loop)),
                      0.0, adversarial};
    user.distance = linf_matrix_distance(user.reference.matrix(), user.filtered.matrix());
    return user;
}

Perturbation draw_perturbation(std::size_t n, std::uint64_t seed) {
    Rng rng = make_rng(seed);
    std::uniform_int_distribution<State> pick(0, static_cast<State>(n - 1));
    return {pick(rng), pick(rng)};
}

void recompute(Epoch& epoch, const ScenarioSpec& spec) {
    epoch.total_distance = 0.0;
    for (const auto& u : epoch.users) epoch.total_distance += u.distance;
    epoch.regime = classify_regime(epoch.total_distance, epoch.users.size(), spec.eps1, spec.eps2);
}

}  // namespace

double ScenarioSpec::resolved_floor() const { return floor.value_or(1.0 / (10.0 * static_cast<double>(states))); }

double ScenarioSpec::max_gap() const {
    const double n = static_cast<double>(states);
    return (1.0 - self_loop) * 2.0 * (n - 1.0) * (1.0 / n - resolved_floor());
}

void ScenarioSpec::validate() const {
    if (states < 2) throw Error(ErrorKind::InvalidArgument, "scenario needs n >= 2");
    if (users < 1) throw Error(ErrorKind::InvalidArgument, "scenario needs at least one user");
    if (gaps.size() != users) {
        throw Error(ErrorKind::InvalidArgument,
                    "expected " + std::to_string(users) + " gap targets, got " + std::to_string(gaps.size()));
    }
    for (double g : gaps) {
        if (!(g >= 0.0 && g <= 2.0)) throw Error(ErrorKind::InvalidArgument, "gap targets must lie in [0, 2]");
    }
    if (!(self_loop >= 0.0 && self_loop < 1.0)) throw Error(ErrorKind::InvalidArgument, "self-loop mass must lie in [0, 1)");
    if (epochs == 0) throw Error(ErrorKind::InvalidArgument, "need at least one epoch");
    const double f = resolved_floor();
    if (!(f >= 0.0 && f <= 1.0 / static_cast<double>(states))) {
        throw Error(ErrorKind::InvalidArgument, "floor must lie in [0, 1/n]");
    }
}

ScenarioTruth Scenario::truth(std::size_t epoch) const {
    std::vector<std::pair<Matrix, Matrix>> pairs;
    for (const auto& u : epochs.at(epoch).users) pairs.emplace_back(u.reference.matrix(), u.filtered.matrix());
    return make_truth(std::move(pairs), spec.eps1, spec.eps2);
}

std::vector<ChainPair> Scenario::chain_pairs(std::size_t epoch) const {
    std::vector<ChainPair> pairs;
    for (const auto& u : epochs.at(epoch).users) pairs.push_back({u.reference, u.filtered});
    return pairs;
}

double Scenario::average_variability(std::size_t epoch) const {
    const auto& e = epochs.at(epoch);
    return e.total_distance / static_cast<double>(e.users.size());
}

Scenario make_scenario(const ScenarioSpec& spec, std::uint64_t seed) {
    spec.validate();
    Scenario scenario;
    scenario.spec = spec;
    scenario.spec.adversarial = 0;  // counted again by inject_adversarial_users
    for (std::size_t e = 0; e < spec.epochs; ++e) {
        const Perturbation where = e == 0 ? Perturbation{static_cast<State>(spec.states - 1), 0}
                                          : draw_perturbation(spec.states, derive_seed(seed, {stream::scenario, e}));
        Epoch epoch;
        for (std::size_t u = 0; u < spec.users; ++u) epoch.users.push_back(build_user(spec, spec.gaps[u], where, false));
        recompute(epoch, spec);
        scenario.epochs.push_back(std::move(epoch));
    }
    if (spec.adversarial > 0) {
        scenario = inject_adversarial_users(std::move(scenario), spec.adversarial, derive_seed(seed, stream::adversarial));
    }
    return scenario;
}

Feeds generate_feeds(const Scenario& scenario, std::size_t walks, std::size_t horizon, std::uint64_t seed,
                     std::size_t epoch) {
    const auto& users = scenario.epochs.at(epoch).users;
    Feeds feeds;
    feeds.filtered.resize(users.size());
    feeds.reference.resize(users.size());
    parallel_for(users.size(), [&](std::size_t u) {
        feeds.filtered[u] = simulate_batch(users[u].filtered, u, World::Filtered, walks, horizon,
                                           derive_seed(seed, {stream::feeds, epoch, u, 0}));
        feeds.reference[u] = simulate_batch(users[u].reference, u, World::Reference, walks, horizon,
                                            derive_seed(seed, {stream::feeds, epoch, u, 1}));
    });
    return feeds;
}

Scenario inject_adversarial_users(Scenario scenario, std::size_t count, std::uint64_t seed) {
    if (count == 0) return scenario;
    const ScenarioSpec& spec = scenario.spec;
    for (std::size_t e = 0; e < scenario.epochs.size(); ++e) {
        auto& users = scenario.epochs[e].users;
        std::vector<ScenarioUser> added;
        for (std::size_t k = 0; k < count; ++k) {
            const Perturbation where = draw_perturbation(spec.states, derive_seed(seed, {e, k}));
            added.push_back(build_user(spec, spec.max_gap(), where, true));
        }
        const auto at = spec.placement == Placement::End ? users.end() : users.begin();
        users.insert(at, std::make_move_iterator(added.begin()), std::make_move_iterator(added.end()));
        recompute(scenario.epochs[e], spec);
    }
    scenario.spec.adversarial += count;
    return scenario;
}

}  // namespace feedaudit
