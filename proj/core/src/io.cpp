#include "feedaudit/io.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace feedaudit {

namespace {

std::vector<State> from_labels(const Json& labels, const std::string& where) {
    std::vector<State> out;
    out.reserve(labels.size());
    for (const auto& v : labels) {
        const auto label = v.get<std::int64_t>();
        if (label < 1) throw Error(ErrorKind::ConfigInvalid, where + ": state labels start at 1");
        out.push_back(static_cast<State>(label - 1));
    }
    return out;
}

Json to_labels(std::span<const State> states) {
    Json out = Json::array();
    for (State s : states) out.push_back(static_cast<std::uint64_t>(s) + 1);
    return out;
}

template <typename Fn>
void for_each_record(const std::filesystem::path& path, Fn&& fn) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot read " + path.string());
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string where = path.string() + ":" + std::to_string(lineno);
        try {
            fn(Json::parse(line), where);
        } catch (const Json::exception& e) {
            throw Error(ErrorKind::ConfigInvalid, where + ": " + e.what());
        }
    }
}

World parse_world(const std::string& w, const std::string& where) {
    if (w == "F") return World::Filtered;
    if (w == "R") return World::Reference;
    throw Error(ErrorKind::ConfigInvalid, where + ": world must be \"F\" or \"R\"");
}

}  // namespace

Json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot read " + path.string());
    try {
        return Json::parse(in);
    } catch (const Json::exception& e) {
        throw Error(ErrorKind::ConfigInvalid, path.string() + ": " + e.what());
    }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
    out << text;
    if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

void write_json(const std::filesystem::path& path, const Json& value) { write_text(path, value.dump(2) + "\n"); }

Json matrix_to_json(const Matrix& m) { return {{"n", m.size()}, {"rows", m.to_rows()}}; }

Matrix matrix_from_json(const Json& j) {
    try {
        const Json& rows = j.is_object() ? j.at("rows") : j;
        Matrix m = Matrix::from_rows(rows.get<std::vector<std::vector<double>>>());
        if (j.is_object() && j.contains("n") && j.at("n").get<std::size_t>() != m.size()) {
            throw Error(ErrorKind::ConfigInvalid, "\"n\" disagrees with the number of rows");
        }
        return m;
    } catch (const Json::exception& e) {
        throw Error(ErrorKind::ConfigInvalid, std::string("bad matrix: ") + e.what());
    }
}

Matrix read_chain(const std::filesystem::path& path) { return matrix_from_json(read_json(path)); }

void write_chain(const std::filesystem::path& path, const Matrix& m) { write_json(path, matrix_to_json(m)); }

std::string trajectories_to_jsonl(std::span<const FeedBatch> batches) {
    std::string out;
    for (const auto& batch : batches) {
        for (std::size_t j = 0; j < batch.trajectories.size(); ++j) {
            const Json record = {{"user", batch.user},
                                 {"world", std::string(to_string(batch.world))},
                                 {"traj_index", j},
                                 {"states", to_labels(batch.trajectories[j].states)}};
            out += record.dump();
            out += '\n';
        }
    }
    return out;
}

void write_trajectories(const std::filesystem::path& path, std::span<const FeedBatch> batches) {
    write_text(path, trajectories_to_jsonl(batches));
}

std::vector<FeedBatch> read_trajectories(const std::filesystem::path& path) {
    struct Pending {
        FeedBatch batch;
        std::vector<std::uint64_t> indices;
    };
    std::vector<Pending> pending;
    for_each_record(path, [&](const Json& r, const std::string& where) {
        const auto user = r.at("user").get<std::uint64_t>();
        const World world = parse_world(r.at("world").get<std::string>(), where);
        auto it = std::find_if(pending.begin(), pending.end(),
                               [&](const Pending& p) { return p.batch.user == user && p.batch.world == world; });
        if (it == pending.end()) {
            pending.push_back({FeedBatch{user, world, {}}, {}});
            it = pending.end() - 1;
        }
        it->indices.push_back(r.at("traj_index").get<std::uint64_t>());
        it->batch.trajectories.push_back(Trajectory{from_labels(r.at("states"), where)});
    });
    std::vector<FeedBatch> out;
    for (auto& p : pending) {
        std::vector<std::size_t> order(p.indices.size());
        for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
        std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return p.indices[a] < p.indices[b]; });
        FeedBatch sorted{p.batch.user, p.batch.world, {}};
        for (auto k : order) sorted.trajectories.push_back(std::move(p.batch.trajectories[k]));
        out.push_back(std::move(sorted));
    }
    return out;
}

std::vector<FeedBatch> select_world(std::span<const FeedBatch> batches, World world) {
    std::vector<FeedBatch> out;
    for (const auto& b : batches) {
        if (b.world == world) out.push_back(b);
    }
    std::stable_sort(out.begin(), out.end(), [](const FeedBatch& a, const FeedBatch& b) { return a.user < b.user; });
    return out;
}

SampleFile read_samples(const std::filesystem::path& path) {
    std::map<std::uint64_t, SampleSet> p, q;
    for_each_record(path, [&](const Json& r, const std::string& where) {
        const auto u = r.at("u").get<std::uint64_t>();
        const auto world = r.at("world").get<std::string>();
        const auto half = r.at("half").get<int>();
        if (world != "P" && world != "Q") throw Error(ErrorKind::ConfigInvalid, where + ": world must be \"P\" or \"Q\"");
        if (half != 1 && half != 2) throw Error(ErrorKind::ConfigInvalid, where + ": half must be 1 or 2");
        SampleSet& set = (world == "P" ? p : q)[u];
        auto& dest = half == 1 ? set.first_half : set.second_half;
        auto symbols = from_labels(r.at("symbols"), where);
        dest.insert(dest.end(), symbols.begin(), symbols.end());
    });
    SampleFile file;
    for (auto& [u, set] : p) {
        auto it = q.find(u);
        if (it == q.end()) throw Error(ErrorKind::ConfigMismatch, "pair " + std::to_string(u) + " has no Q samples");
        file.users.push_back(u);
        file.p.push_back(std::move(set));
        file.q.push_back(std::move(it->second));
    }
    if (file.users.size() != q.size()) throw Error(ErrorKind::ConfigMismatch, "some Q samples have no P counterpart");
    return file;
}

std::string samples_to_jsonl(const SampleFile& samples) {
    std::string out;
    for (std::size_t k = 0; k < samples.users.size(); ++k) {
        for (int w = 0; w < 2; ++w) {
            const SampleSet& set = w == 0 ? samples.p[k] : samples.q[k];
            for (int half = 1; half <= 2; ++half) {
                const Json record = {{"u", samples.users[k]},
                                     {"world", w == 0 ? "P" : "Q"},
                                     {"half", half},
                                     {"symbols", to_labels(half == 1 ? set.first_half : set.second_half)}};
                out += record.dump();
                out += '\n';
            }
        }
    }
    return out;
}

CounterfactualPairing read_pairing(const std::filesystem::path& path) {
    const Json j = read_json(path);
    std::vector<UserPair> pairs;
    try {
        for (const auto& p : j.at("pairs")) {
            if (p.size() != 2) throw Error(ErrorKind::ConfigInvalid, "each pair needs exactly two users");
            pairs.push_back({p[0].get<std::uint64_t>(), p[1].get<std::uint64_t>()});
        }
    } catch (const Json::exception& e) {
        throw Error(ErrorKind::ConfigInvalid, path.string() + ": " + e.what());
    }
    return CounterfactualPairing(std::move(pairs));
}

Json pairing_to_json(const CounterfactualPairing& pairing) {
    Json pairs = Json::array();
    for (const auto& p : pairing.pairs()) pairs.push_back({p.first, p.second});
    return {{"pairs", pairs}};
}

Json truth_to_json(const ScenarioTruth& truth) {
    Json users = Json::array();
    for (const auto& u : truth.users) {
        users.push_back({{"P_R", u.reference.to_rows()}, {"Q_F", u.filtered.to_rows()}, {"distance", u.distance}});
    }
    return {{"users", users},
            {"eps1", truth.eps1},
            {"eps2", truth.eps2},
            {"total_distance", truth.total_distance},
            {"regime", std::string(to_string(truth.regime))}};
}

ScenarioTruth truth_from_json(const Json& j) {
    std::vector<std::pair<Matrix, Matrix>> pairs;
    const Json users = require<Json>(j, "users", "");
    if (!users.is_array()) throw Error(ErrorKind::ConfigInvalid, "field 'users' must be an array");
    for (const auto& u : users) {
        pairs.emplace_back(matrix_from_json(require<Json>(u, "P_R", "users[].")),
                           matrix_from_json(require<Json>(u, "Q_F", "users[].")));
    }
    return make_truth(std::move(pairs), require<double>(j, "eps1", ""), require<double>(j, "eps2", ""));
}

Json verdict_to_json(const Verdict& verdict) {
    Json per_state = Json::object();
    for (const auto& s : verdict.per_state) {
        Json entry = {{"coverage_ok", s.coverage_ok},
                      {"filtered_successors", s.filtered_successors},
                      {"reference_successors", s.reference_successors}};
        if (s.decision) entry["decision"] = std::string(to_string(*s.decision));
        if (s.g) entry["g"] = *s.g;
        if (s.tau) entry["tau"] = *s.tau;
        per_state[std::to_string(s.state + 1)] = std::move(entry);
    }
    return {{"decision", std::string(to_string(verdict.decision))},
            {"reason", std::string(to_string(verdict.reason))},
            {"successor_budget", verdict.successor_budget},
            {"per_state", per_state}};
}

Json iid_verdict_to_json(const IIDVerdict& verdict) {
    return {{"decision", std::string(to_string(verdict.decision))},
            {"statistic", verdict.statistic.total},
            {"threshold", verdict.threshold},
            {"truncated", verdict.truncated}};
}

ScenarioSpec scenario_spec_from_json(const Json& j) {
    const std::string ctx = "scenario.";
    ScenarioSpec spec;
    spec.states = require<std::size_t>(j, "n", ctx);
    spec.users = require<std::size_t>(j, "U", ctx);
    if (!j.is_object() || !j.contains("gap")) throw Error(ErrorKind::ConfigInvalid, "missing field 'scenario.gap'");
    const Json& gap = j.at("gap");
    if (gap.is_number()) {
        spec.gaps.assign(spec.users, gap.get<double>());
    } else {
        spec.gaps = require<std::vector<double>>(j, "gap", ctx);
    }
    spec.self_loop = optional_field<double>(j, "self_loop", 0.0, ctx);
    spec.epochs = optional_field<std::size_t>(j, "epochs", 1, ctx);
    if (j.contains("adversarial")) {
        const Json& adv = j.at("adversarial");
        if (adv.is_number()) {
            spec.adversarial = adv.get<std::size_t>();
        } else {
            spec.adversarial = require<std::size_t>(adv, "count", ctx + "adversarial.");
            const auto placement = optional_field<std::string>(adv, "placement", "end", ctx + "adversarial.");
            if (placement != "end" && placement != "start") {
                throw Error(ErrorKind::ConfigInvalid, "field 'scenario.adversarial.placement' must be end or start");
            }
            spec.placement = placement == "end" ? Placement::End : Placement::Start;
        }
    }
    if (j.contains("floor")) spec.floor = require<double>(j, "floor", ctx);
    spec.eps1 = optional_field<double>(j, "eps1", 0.0, ctx);
    spec.eps2 = require<double>(j, "eps2", ctx);
    try {
        spec.validate();
    } catch (const Error& e) {
        throw Error(ErrorKind::ConfigInvalid, std::string("scenario: ") + e.what());
    }
    return spec;
}

}  // namespace feedaudit
