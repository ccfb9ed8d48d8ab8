#pragma once

// File formats. States are 1-based in every file and 0-based in memory.
//
//   chain       {"n": int, "rows": [[...], ...]}
//   trajectory  JSONL {"user": int, "world": "F"|"R", "traj_index": int, "states": [...]}
//   samples     JSONL {"u": int, "world": "P"|"Q", "half": 1|2, "symbols": [...]}
//   pairing     {"pairs": [[i, j], ...]}
//   truth       {"users": [{"P_R": rows, "Q_F": rows}], "eps1": f, "eps2": f}

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "feedaudit/counterfactual_tester.hpp"
#include "feedaudit/error.hpp"
#include "feedaudit/iid_tester.hpp"
#include "feedaudit/markov_chain.hpp"
#include "feedaudit/oracle.hpp"
#include "feedaudit/platform_sim.hpp"
#include "feedaudit/regulatory_tester.hpp"

namespace feedaudit {

using Json = nlohmann::json;

/// Parses a whole file; Io if unreadable, ConfigInvalid if malformed.
Json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const Json& value);
void write_text(const std::filesystem::path& path, const std::string& text);

Json matrix_to_json(const Matrix& m);
/// Accepts {"n", "rows"} or a bare array of rows.
Matrix matrix_from_json(const Json& j);
Matrix read_chain(const std::filesystem::path& path);
void write_chain(const std::filesystem::path& path, const Matrix& m);

std::string trajectories_to_jsonl(std::span<const FeedBatch> batches);
void write_trajectories(const std::filesystem::path& path, std::span<const FeedBatch> batches);
/// Groups records by (user, world) in order of first appearance; trajectories
/// within a batch are ordered by traj_index.
std::vector<FeedBatch> read_trajectories(const std::filesystem::path& path);
/// Batches of one world, ascending by user id.
std::vector<FeedBatch> select_world(std::span<const FeedBatch> batches, World world);

struct SampleFile {
    std::vector<std::uint64_t> users;  ///< ascending "u" values
    std::vector<SampleSet> p;
    std::vector<SampleSet> q;
};
SampleFile read_samples(const std::filesystem::path& path);
std::string samples_to_jsonl(const SampleFile& samples);

CounterfactualPairing read_pairing(const std::filesystem::path& path);
Json pairing_to_json(const CounterfactualPairing& pairing);

Json truth_to_json(const ScenarioTruth& truth);
ScenarioTruth truth_from_json(const Json& j);

Json verdict_to_json(const Verdict& verdict);
Json iid_verdict_to_json(const IIDVerdict& verdict);

/// Fields: n, U, gap (number for every user, or a list of U numbers),
/// self_loop, epochs, adversarial (count or {"count", "placement": "end"|"start"}),
/// floor, eps1, eps2. Missing n, U, gap or eps2 is ConfigInvalid.
ScenarioSpec scenario_spec_from_json(const Json& j);

/// Required-field accessor: ConfigInvalid naming `context.key` when absent or
/// of the wrong type.
template <typename T>
T require(const Json& j, const std::string& key, const std::string& context) {
    if (!j.is_object() || !j.contains(key)) throw Error(ErrorKind::ConfigInvalid, "missing field '" + context + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw Error(ErrorKind::ConfigInvalid, "field '" + context + key + "' has the wrong type");
    }
}

template <typename T>
T optional_field(const Json& j, const std::string& key, T fallback, const std::string& context) {
    if (!j.is_object() || !j.contains(key) || j.at(key).is_null()) return fallback;
    return require<T>(j, key, context);
}

}  // namespace feedaudit
