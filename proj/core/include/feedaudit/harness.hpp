#pragma once

// Config-driven experiment runner behind the `feedaudit` executable.
//
// Every command reads one JSON config whose relative paths resolve against the
// config file's directory, draws all randomness from the root "seed", and
// writes a JSON report echoing the effective config, the git blob hashes of
// its inputs and the result. Wall-clock time goes to a `.timing.json` sidecar
// so the report itself is reproducible byte for byte.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "feedaudit/io.hpp"

namespace feedaudit {

inline constexpr int kExitYes = 0;
inline constexpr int kExitNo = 1;
inline constexpr int kExitError = 2;

const std::vector<std::string>& known_commands();

struct RunOptions {
    /// Empty means take "command" from the config.
    std::string command;
    std::filesystem::path config;
    std::optional<std::uint64_t> seed_override;
    /// Report path; defaults to config "out", then `<config stem>.<command>.report.json`.
    std::optional<std::filesystem::path> out;
    /// Worker threads for this run; results do not depend on it.
    std::optional<unsigned> threads;
};

struct RunResult {
    int exit_code = kExitError;
    Json report;
    std::filesystem::path report_path;
    std::string error;  ///< empty on success
};

/// Never throws for bad input: failures become exit code 2 with the message in
/// `error` (and in the report when a report path is known).
RunResult run(const RunOptions& options);
int run(const std::filesystem::path& config);

/// Applies an RFC 7386 merge patch.
Json merge_patch(Json base, const Json& patch);

}  // namespace feedaudit
