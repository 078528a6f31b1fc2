// levymlmc_cli: runs pricing, MLMC and coupling experiments from INI configs.

#include <CLI11.hpp>

#include <iostream>

#include "experiments.hpp"
#include "presets.hpp"

namespace {

using namespace levymlmc;

ConfigFile resolve_config(const std::string& path, const std::string& preset) {
    if (!path.empty() && !preset.empty()) throw ConfigError("give either --config or --preset, not both");
    if (!preset.empty()) {
        const auto& p = cli::presets();
        const auto it = p.find(preset);
        if (it == p.end()) {
            std::string names;
            for (const auto& [k, v] : p) names += (names.empty() ? "" : ", ") + k;
            throw ConfigError("unknown preset '" + preset + "' (available: " + names + ")");
        }
        return ConfigFile::parse(it->second, "preset:" + preset);
    }
    if (path.empty()) throw ConfigError("no configuration: pass --config FILE or --preset NAME");
    return ConfigFile::load(path);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Levy-driven Monte Carlo and multilevel Monte Carlo experiments"};
    app.set_version_flag("--version", std::string(LEVYMLMC_VERSION));
    app.require_subcommand(1);
    app.fallthrough();

    std::string config, preset;
    cli::Overrides ov;
    std::uint64_t seed = 0;
    unsigned threads = 0;
    std::string out;
    app.add_option("--config", config, "experiment INI file");
    app.add_option("--preset", preset, "built-in configuration (cgmy15-put-diagnostics, hem-cds, fmm-swaption)");
    auto* seed_opt = app.add_option("--seed", seed, "root seed, overrides [experiment] seed");
    auto* threads_opt = app.add_option("--threads", threads, "worker threads (0 = all cores)");
    auto* out_opt = app.add_option("--out", out, "output path prefix for CSV files");

    const std::vector<std::pair<std::string, std::string>> kinds = {
        {"price", "plain Monte Carlo price at grid.h"},
        {"mlmc-run", "adaptive MLMC estimate at mlmc.eps"},
        {"mlmc-diagnostics", "per-level means, variances and costs up to mlmc.levels"},
        {"mlmc-cost-curve", "MLMC cost for each value in mlmc.eps_list"},
        {"credit", "CDS or first-to-default spreads against closed forms"},
        {"fmm", "swaption on the Levy forward market model"},
        {"verify-coupling", "check the coupling rate identity on every coarse cell"},
    };
    for (const auto& [k, help] : kinds) app.add_subcommand(k, help);
    app.add_subcommand("run", "run the experiments listed in [experiment] experiments");
    app.add_subcommand("show-config", "print the resolved configuration in canonical form");

    CLI11_PARSE(app, argc, argv);

    try {
        ConfigFile cfg = resolve_config(config, preset);
        if (*seed_opt) ov.seed = seed;
        if (*threads_opt) ov.threads = threads;
        if (*out_opt) ov.out = out;
        const std::string sub = app.get_subcommands().front()->get_name();
        if (sub == "show-config") {
            std::cout << cfg.text();
            return 0;
        }
        const cli::Context ctx(std::move(cfg), ov);
        if (sub == "run") return cli::run_all(ctx);
        return cli::run_kind(sub, ctx);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const SizingError& e) {
        std::cerr << "sizing error: " << e.what() << '\n';
        return 3;
    } catch (const DiagnosticsError& e) {
        std::cerr << "diagnostics: " << e.what() << '\n';
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
