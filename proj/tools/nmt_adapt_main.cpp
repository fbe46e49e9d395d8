// nmt-adapt: synthesize a related-language data family, adapt a supervised
// translation model to the low-resource language, and report the results.

#include <cstdlib>
#include <iostream>

#include "CLI11.hpp"
#include "nmtadapt/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Low-resource translation adaptation pipeline"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_override;
    std::uint64_t seed_override = 0;
    bool seed_given = false, quiet = false;
    app.add_option("--config", config_path, "JSON run configuration file");
    app.add_option("--out", out_override, "Output directory (overrides config)");
    app.add_option("--seed", seed_override, "Seed (overrides config)")
        ->each([&](const std::string&) { seed_given = true; });
    app.add_flag("--quiet", quiet, "Suppress diagnostics");

    std::string command;
    for (const auto& name : nmtadapt::cli::command_names())
        app.add_subcommand(name)->callback([&command, name] { command = name; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);  // prints help/usage text
        return code == 0 ? 0 : 2;      // any usage problem is a config error
    }

    nmtadapt::RunConfig cfg;
    try {
        if (!config_path.empty()) cfg = nmtadapt::parse_config(config_path);
    } catch (const std::exception& e) {
        if (!quiet) std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    if (!out_override.empty()) cfg.out_dir = out_override;
    if (seed_given) {
        cfg.seed = seed_override;
        cfg.train.seed = seed_override;
    }
    if (const char* root = std::getenv("NMT_ADAPT_OUT_ROOT"))
        if (*root && cfg.out_dir.is_relative()) cfg.out_dir = nmtadapt::io::fs::path(root) / cfg.out_dir;

    return nmtadapt::cli::execute(command, cfg, quiet);
}
