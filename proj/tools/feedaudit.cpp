// feedaudit <command> --config path [--seed-override u64] [--out path] [--threads n]

#include <iostream>

#include <CLI11.hpp>

#include "feedaudit/harness.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Simulate platform feeds and test them against a reference filter"};
    app.require_subcommand(1);

    feedaudit::RunOptions options;
    std::uint64_t seed = 0;
    std::string out;
    unsigned threads = 0;
    for (const auto& name : feedaudit::known_commands()) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", options.config, "JSON experiment config")->required()->check(CLI::ExistingFile);
        sub->add_option("--seed-override", seed, "Replace the config's root seed");
        sub->add_option("--out", out, "Report path");
        sub->add_option("--threads", threads, "Worker threads (0 = hardware default)");
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : feedaudit::kExitError;
    }

    auto* sub = app.get_subcommands().front();
    options.command = sub->get_name();
    if (sub->count("--seed-override")) options.seed_override = seed;
    if (!out.empty()) options.out = out;
    if (threads) options.threads = threads;

    const auto result = feedaudit::run(options);
    if (!result.error.empty()) std::cerr << "feedaudit: " << result.error << '\n';
    if (!result.report_path.empty()) std::cout << result.report_path.string() << '\n';
    return result.exit_code;
}
