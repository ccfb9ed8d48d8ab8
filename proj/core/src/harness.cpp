#include "feedaudit/harness.hpp"

#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>

#include "feedaudit/content_hash.hpp"
#include "feedaudit/parallel.hpp"
#include "feedaudit/platform_sim.hpp"

namespace feedaudit {

namespace fs = std::filesystem;

namespace {

struct Context {
    fs::path base_dir;
    Json config;  ///< effective config, echoed in the report
    std::uint64_t seed = 0;
    Json inputs = Json::object();
    Json outputs = Json::object();

    fs::path resolve(const std::string& p) const {
        const fs::path path(p);
        return path.is_absolute() ? path : base_dir / path;
    }

    std::string slurp(const std::string& p) const {
        std::ifstream in(resolve(p), std::ios::binary);
        if (!in) throw Error(ErrorKind::Io, "cannot read " + resolve(p).string());
        std::ostringstream buf;
        buf << in.rdbuf();
        return buf.str();
    }

    /// Resolves a read path, checks it exists and records its blob hash.
    fs::path input(const std::string& field, const Json& j, const std::string& ctx = "") {
        const auto p = require<std::string>(j, field, ctx);
        const fs::path path = resolve(p);
        if (!fs::exists(path)) throw Error(ErrorKind::ConfigInvalid, "field '" + ctx + field + "': " + p + " does not exist");
        inputs[p] = git_blob_hash(slurp(p));
        return path;
    }

    void record_output(const std::string& p) { outputs[p] = git_blob_hash(slurp(p)); }
};

struct Outcome {
    int exit_code = kExitYes;
    Json result;
};

int exit_for(Decision d) { return d == Decision::Yes ? kExitYes : kExitNo; }

RegulatoryConfig parse_regulatory(Context& ctx, const Json& j, const std::string& where,
                                  std::optional<std::size_t> default_n = {}) {
    RegulatoryConfig config;
    config.states = default_n ? optional_field<std::size_t>(j, "n", *default_n, where)
                              : require<std::size_t>(j, "n", where);
    config.eps1 = optional_field<double>(j, "eps1", 0.0, where);
    config.eps2 = require<double>(j, "eps2", where);
    config.delta = require<double>(j, "delta", where);
    if (j.contains("calibration")) {
        const Calibration cal = load_calibration(ctx.input("calibration", j, where));
        config.c = cal.c;
        config.budget.multiplier = cal.multiplier;
    }
    config.c = optional_field<double>(j, "c", config.c, where);
    config.budget.multiplier = optional_field<double>(j, "C", config.budget.multiplier, where);
    if (j.contains("successor_budget")) config.successor_budget = require<std::uint64_t>(j, "successor_budget", where);
    config.poissonize = optional_field<bool>(j, "poissonize", false, where);
    config.early_exit = optional_field<bool>(j, "early_exit", true, where);
    config.seed = ctx.seed;
    if (config.states == 0) throw Error(ErrorKind::ConfigInvalid, "field '" + where + "n' must be positive");
    if (!(config.delta > 0.0 && config.delta < 1.0)) {
        throw Error(ErrorKind::ConfigInvalid, "field '" + where + "delta' must lie in (0, 1)");
    }
    if (!(config.eps2 > 0.0)) throw Error(ErrorKind::ConfigInvalid, "field '" + where + "eps2' must be positive");
    return config;
}

Json cover_estimate_json(const CoverTimeEstimate& est) {
    Json profiles = Json::array();
    for (const auto& p : est.profiles) {
        profiles.push_back({{"start", p.start ? Json(static_cast<std::uint64_t>(*p.start) + 1) : Json("stationary")},
                            {"mean", p.mean},
                            {"std_error", p.std_error}});
    }
    return {{"walks", est.walks}, {"k", est.k},           {"trials", est.trials},
            {"value", est.value()}, {"std_error", est.std_error()}, {"profiles", profiles}};
}

/// Scenario plus feed parameters, shared by simulate and sweep.
struct Experiment {
    Scenario scenario;
    std::size_t walks = 1;
    std::uint64_t horizon = 1;
    RegulatoryConfig regulatory;
};

Experiment build_experiment(Context& ctx, const Json& j, std::uint64_t seed, const std::string& where) {
    Experiment ex;
    const ScenarioSpec spec = scenario_spec_from_json(require<Json>(j, "scenario", where));
    ex.scenario = make_scenario(spec, derive_seed(seed, stream::scenario));
    ex.walks = require<std::size_t>(j, "walks", where);
    if (ex.walks == 0) throw Error(ErrorKind::ConfigInvalid, "field '" + where + "walks' must be positive");
    Json reg = j.contains("regulatory") ? j.at("regulatory") : Json::object();
    if (!reg.contains("eps1")) reg["eps1"] = spec.eps1;
    if (!reg.contains("eps2")) reg["eps2"] = spec.eps2;
    if (!reg.contains("delta")) reg["delta"] = optional_field<double>(j, "delta", 0.1, where);
    ex.regulatory = parse_regulatory(ctx, reg, where + "regulatory.", spec.states);
    if (!j.contains("horizon")) throw Error(ErrorKind::ConfigInvalid, "missing field '" + where + "horizon'");
    const Json& h = j.at("horizon");
    if (h.is_string() && h.get<std::string>() == "auto") {
        HorizonOptions opts;
        opts.walks = ex.walks;
        opts.trials = optional_field<std::size_t>(j, "horizon_trials", 200, where);
        opts.seed = derive_seed(seed, stream::cover_time);
        ex.horizon = required_horizon(ex.scenario.chain_pairs(), ex.regulatory, opts);
    } else {
        ex.horizon = require<std::uint64_t>(j, "horizon", where);
        if (ex.horizon == 0) throw Error(ErrorKind::ConfigInvalid, "field '" + where + "horizon' must be positive");
    }
    return ex;
}

Json scenario_summary(const Experiment& ex, std::size_t epoch) {
    const auto& e = ex.scenario.epochs.at(epoch);
    Json distances = Json::array();
    for (const auto& u : e.users) distances.push_back(u.distance);
    return {{"users", e.users.size()},
            {"distances", distances},
            {"total_distance", e.total_distance},
            {"average_variability", ex.scenario.average_variability(epoch)},
            {"regime", std::string(to_string(e.regime))},
            {"walks", ex.walks},
            {"horizon", ex.horizon},
            {"successor_budget", ex.regulatory.resolved_budget(e.users.size())}};
}

Outcome cmd_simulate(Context& ctx) {
    const Json& cfg = ctx.config;
    Experiment ex = build_experiment(ctx, cfg, ctx.seed, "");
    const auto epoch = optional_field<std::size_t>(cfg, "epoch", 0, "");
    if (epoch >= ex.scenario.epochs.size()) throw Error(ErrorKind::ConfigInvalid, "field 'epoch' is out of range");
    const Json outputs = require<Json>(cfg, "outputs", "");
    const auto truth_path = require<std::string>(outputs, "truth", "outputs.");
    const auto filtered_path = require<std::string>(outputs, "filtered", "outputs.");
    const auto reference_path = require<std::string>(outputs, "reference", "outputs.");

    const Feeds feeds = generate_feeds(ex.scenario, ex.walks, ex.horizon, derive_seed(ctx.seed, stream::feeds), epoch);
    write_json(ctx.resolve(truth_path), truth_to_json(ex.scenario.truth(epoch)));
    write_trajectories(ctx.resolve(filtered_path), feeds.filtered);
    write_trajectories(ctx.resolve(reference_path), feeds.reference);
    for (const auto& p : {truth_path, filtered_path, reference_path}) ctx.record_output(p);
    return {kExitYes, scenario_summary(ex, epoch)};
}

Outcome cmd_test_iid(Context& ctx) {
    const Json& cfg = ctx.config;
    const SampleFile samples = read_samples(ctx.input("samples", cfg));
    if (samples.users.empty()) throw Error(ErrorKind::ConfigInvalid, "sample file has no pairs");
    const Json iid = require<Json>(cfg, "iid", "");
    IIDTestConfig config;
    config.pairs = samples.users.size();
    config.alphabet = require<std::size_t>(iid, "n", "iid.");
    config.eps1 = optional_field<double>(iid, "eps1", 0.0, "iid.");
    config.eps2 = require<double>(iid, "eps2", "iid.");
    config.delta = require<double>(iid, "delta", "iid.");
    if (iid.contains("calibration")) config.c = load_calibration(ctx.input("calibration", iid, "iid.")).c;
    config.c = optional_field<double>(iid, "c", config.c, "iid.");
    config.poissonize = optional_field<bool>(iid, "poissonize", true, "iid.");
    std::uint64_t smallest = std::numeric_limits<std::uint64_t>::max();
    for (std::size_t k = 0; k < samples.users.size(); ++k) {
        for (const SampleSet* s : {&samples.p[k], &samples.q[k]}) {
            smallest = std::min<std::uint64_t>({smallest, s->first_half.size(), s->second_half.size()});
        }
    }
    config.m = optional_field<std::uint64_t>(iid, "m", smallest, "iid.");
    for (const auto& sets : {samples.p, samples.q}) {
        for (const auto& s : sets) {
            for (const auto* half : {&s.first_half, &s.second_half}) {
                for (State x : *half) {
                    if (x >= config.alphabet) throw Error(ErrorKind::ConfigInvalid, "symbol outside [1..n]");
                }
            }
        }
    }
    try {
        config.validate();
    } catch (const Error& e) {
        throw Error(ErrorKind::ConfigInvalid, std::string("iid: ") + e.what());
    }
    const IIDVerdict verdict = iid_tester(samples.p, samples.q, config, derive_seed(ctx.seed, stream::iid));
    Json result = iid_verdict_to_json(verdict);
    result["m"] = config.m;
    result["pairs"] = config.pairs;
    return {exit_for(verdict.decision), result};
}

Outcome cmd_test_regulatory(Context& ctx) {
    const Json& cfg = ctx.config;
    const RegulatoryConfig config = parse_regulatory(ctx, require<Json>(cfg, "regulatory", ""), "regulatory.");
    const auto filtered_all = read_trajectories(ctx.input("filtered", cfg));
    const auto reference_all = read_trajectories(ctx.input("reference", cfg));
    const auto filtered = select_world(filtered_all, World::Filtered);
    const auto reference = select_world(reference_all, World::Reference);
    const Verdict verdict = regulatory_tester(filtered, reference, config);
    return {exit_for(verdict.decision), verdict_to_json(verdict)};
}

Outcome cmd_test_counterfactual(Context& ctx) {
    const Json& cfg = ctx.config;
    const Json cf = require<Json>(cfg, "counterfactual", "");
    CounterfactualConfig config;
    Json base = cf;
    if (!base.contains("delta")) base["delta"] = std::max(require<double>(cf, "delta_b1", "counterfactual."),
                                                          require<double>(cf, "delta_b2", "counterfactual."));
    config.base = parse_regulatory(ctx, base, "counterfactual.");
    config.delta_b1 = require<double>(cf, "delta_b1", "counterfactual.");
    config.delta_b2 = require<double>(cf, "delta_b2", "counterfactual.");
    const CounterfactualPairing pairing = read_pairing(ctx.input("pairing", cfg));
    std::map<std::uint64_t, FeedBatch> filtered, reference;
    for (auto& b : select_world(read_trajectories(ctx.input("filtered", cfg)), World::Filtered)) {
        filtered.emplace(b.user, std::move(b));
    }
    for (auto& b : select_world(read_trajectories(ctx.input("reference", cfg)), World::Reference)) {
        reference.emplace(b.user, std::move(b));
    }
    const CounterfactualVerdict verdict = counterfactual_tester(pairing, filtered, reference, config);
    return {exit_for(verdict.decision),
            {{"decision", std::string(to_string(verdict.decision))},
             {"block1", verdict_to_json(verdict.block1)},
             {"block2", verdict_to_json(verdict.block2)},
             {"pairing", pairing_to_json(pairing)["pairs"]}}};
}

Outcome cmd_calibrate(Context& ctx) {
    const Json& cfg = ctx.config;
    std::vector<CalibrationPoint> grid;
    const Json g = cfg.contains("grid") ? cfg.at("grid") : Json("default");
    if (g.is_string() && g.get<std::string>() == "default") {
        grid = default_calibration_grid();
    } else if (g.is_array()) {
        for (const auto& pt : g) {
            auto point = make_uniform_point(require<std::size_t>(pt, "n", "grid[]."), require<std::size_t>(pt, "U", "grid[]."),
                                            require<double>(pt, "eps2", "grid[]."), require<double>(pt, "delta", "grid[]."),
                                            require<double>(pt, "distance", "grid[]."));
            point.eps1 = optional_field<double>(pt, "eps1", 0.0, "grid[].");
            point.null_instance = point.null_instance || require<double>(pt, "distance", "grid[].") <= point.eps1;
            grid.push_back(std::move(point));
        }
    } else {
        throw Error(ErrorKind::ConfigInvalid, "field 'grid' must be \"default\" or a list of points");
    }
    CalibrationOptions options;
    options.multipliers = optional_field<std::vector<double>>(cfg, "multipliers", options.multipliers, "");
    const auto trials = require<std::size_t>(cfg, "trials", "");
    const Calibration cal = calibrate_constant(grid, trials, ctx.seed, options);
    const auto output = require<std::string>(cfg, "output", "");
    save_calibration(cal, ctx.resolve(output));
    ctx.record_output(output);
    Json points = Json::array();
    for (const auto& p : cal.points) points.push_back({{"m", p.m}, {"error", p.error}, {"std_error", p.std_error}});
    return {kExitYes,
            {{"c", cal.c},
             {"C", cal.multiplier},
             {"grid_hash", cal.grid_hash},
             {"achieved_error", cal.achieved_error},
             {"achieved_error_se", cal.achieved_error_se},
             {"points", points}}};
}

Outcome cmd_cover_time(Context& ctx) {
    const Json& cfg = ctx.config;
    if (!cfg.contains("chain")) throw Error(ErrorKind::ConfigInvalid, "missing field 'chain'");
    const Matrix m = cfg.at("chain").is_string() ? read_chain(ctx.input("chain", cfg)) : matrix_from_json(cfg.at("chain"));
    const MarkovChain chain = validate_chain(m);
    CoverTimeOptions options;
    options.budget = optional_field<std::uint64_t>(cfg, "budget", options.budget, "");
    const auto est = estimate_cover_time(chain, require<std::uint64_t>(cfg, "walks", ""), require<std::uint64_t>(cfg, "k", ""),
                                         require<std::size_t>(cfg, "trials", ""), derive_seed(ctx.seed, stream::cover_time),
                                         options);
    return {kExitYes, cover_estimate_json(est)};
}

Outcome cmd_sweep(Context& ctx) {
    const Json& cfg = ctx.config;
    const Json base = require<Json>(cfg, "base", "");
    const Json grid = require<Json>(cfg, "grid", "");
    if (!grid.is_array() || grid.empty()) throw Error(ErrorKind::ConfigInvalid, "field 'grid' must be a non-empty list");
    const auto tester = optional_field<std::string>(cfg, "tester", "regulatory", "");
    if (tester != "regulatory") throw Error(ErrorKind::ConfigInvalid, "field 'tester' must be \"regulatory\"");
    const auto trials = require<std::size_t>(cfg, "trials", "");
    const auto csv = require<std::string>(cfg, "csv", "");

    std::vector<ResultRow> rows;
    Json points = Json::array();
    for (std::size_t k = 0; k < grid.size(); ++k) {
        Json patch = grid[k];
        const std::string id = patch.is_object() && patch.contains("id") ? patch.at("id").get<std::string>()
                                                                          : "point" + std::to_string(k);
        if (patch.is_object()) patch.erase("id");
        const Json point_cfg = merge_patch(base, patch);
        const std::uint64_t point_seed = derive_seed(ctx.seed, k);
        const Experiment ex = build_experiment(ctx, point_cfg, point_seed, "grid[" + std::to_string(k) + "].");
        const RegulatoryPipeline pipeline{ex.regulatory, ex.walks, ex.horizon};
        const std::uint64_t trial_seed = derive_seed(point_seed, stream::trial);
        const YesRate rate = verdict_probability(ex.scenario.truth(), pipeline, trials, trial_seed);
        rows.push_back({id, tester, rate.trials, rate.rate, rate.std_error, trial_seed});
        Json summary = scenario_summary(ex, 0);
        summary["id"] = id;
        summary["yes_rate"] = rate.rate;
        summary["se"] = rate.std_error;
        points.push_back(std::move(summary));
    }
    append_results_csv(ctx.resolve(csv), rows);
    ctx.record_output(csv);
    return {kExitYes, {{"points", points}}};
}

Outcome dispatch(const std::string& command, Context& ctx) {
    if (command == "simulate") return cmd_simulate(ctx);
    if (command == "test-iid") return cmd_test_iid(ctx);
    if (command == "test-regulatory") return cmd_test_regulatory(ctx);
    if (command == "test-counterfactual") return cmd_test_counterfactual(ctx);
    if (command == "calibrate") return cmd_calibrate(ctx);
    if (command == "cover-time") return cmd_cover_time(ctx);
    if (command == "sweep") return cmd_sweep(ctx);
    throw Error(ErrorKind::ConfigInvalid, "unknown command '" + command + "'");
}

}  // namespace

const std::vector<std::string>& known_commands() {
    static const std::vector<std::string> commands{"simulate",  "test-iid",   "test-regulatory", "test-counterfactual",
                                                   "calibrate", "cover-time", "sweep"};
    return commands;
}

Json merge_patch(Json base, const Json& patch) {
    base.merge_patch(patch);
    return base;
}

RunResult run(const RunOptions& options) {
    const auto started = std::chrono::steady_clock::now();
    RunResult result;
    Context ctx;
    std::string command = options.command;
    const unsigned previous_threads = detail::default_threads.load();
    if (options.threads) set_default_threads(*options.threads);
    try {
        ctx.base_dir = options.config.parent_path();
        ctx.config = read_json(options.config);
        if (!ctx.config.is_object()) throw Error(ErrorKind::ConfigInvalid, "config must be a JSON object");
        if (ctx.config.contains("command")) {
            const auto named = require<std::string>(ctx.config, "command", "");
            if (!command.empty() && named != command) {
                throw Error(ErrorKind::ConfigInvalid, "field 'command' is '" + named + "' but '" + command + "' was requested");
            }
            command = named;
        }
        if (command.empty()) throw Error(ErrorKind::ConfigInvalid, "missing field 'command'");
        ctx.config["command"] = command;
        if (options.seed_override) ctx.config["seed"] = *options.seed_override;
        ctx.seed = require<std::uint64_t>(ctx.config, "seed", "");

        if (options.out) {
            result.report_path = *options.out;
        } else if (ctx.config.contains("out")) {
            result.report_path = ctx.resolve(require<std::string>(ctx.config, "out", ""));
        } else {
            result.report_path = ctx.base_dir / (options.config.stem().string() + "." + command + ".report.json");
        }

        const Outcome outcome = dispatch(command, ctx);
        result.exit_code = outcome.exit_code;
        result.report = {{"command", command},   {"seed", ctx.seed},       {"config", ctx.config},
                         {"inputs", ctx.inputs}, {"outputs", ctx.outputs}, {"result", outcome.result},
                         {"exit_code", outcome.exit_code}};
    } catch (const std::exception& e) {
        result.exit_code = kExitError;
        result.error = e.what();
        ErrorKind kind = ErrorKind::InvalidArgument;
        if (const auto* fe = dynamic_cast<const Error*>(&e)) kind = fe->kind();
        result.report = {{"command", command},
                         {"config", ctx.config},
                         {"error", {{"kind", std::string(to_string(kind))}, {"message", result.error}}},
                         {"exit_code", kExitError}};
    }
    if (!result.report_path.empty()) {
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        try {
            write_json(result.report_path, result.report);
            fs::path timing = result.report_path;
            timing += ".timing.json";
            write_json(timing, Json{{"wall_clock_seconds", seconds}});
        } catch (const std::exception& e) {
            if (result.error.empty()) result.error = e.what();
            result.exit_code = kExitError;
        }
    }
    set_default_threads(previous_threads);
    return result;
}

int run(const fs::path& config) {
    RunOptions options;
    options.config = config;
    return run(options).exit_code;
}

}  // namespace feedaudit
