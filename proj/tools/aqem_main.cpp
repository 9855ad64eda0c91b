#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "aqem/commands.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Adaptive phase estimation benchmark: train, sweep, fit, report"};
    app.require_subcommand(1, 1);

    std::string config_path;
    std::string preset;
    std::uint64_t seed = 0;
    int workers = 0;
    long trials = 0;

    const std::map<std::string, void (*)(const aqem::RunConfig&, std::ostream&)> commands = {
        {"train", aqem::cmd_train},
        {"sweep", aqem::cmd_sweep},
        {"fit", aqem::cmd_fit},
        {"report", aqem::cmd_report},
    };
    std::map<std::string, CLI::App*> subs;
    std::map<std::string, CLI::Option*> seed_opt, workers_opt, trials_opt;
    for (const auto& [name, fn] : commands) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "JSON config file")->required();
        sub->add_option("--preset", preset, "desk or paper")->check(CLI::IsMember({"desk", "paper"}));
        seed_opt[name] = sub->add_option("--seed", seed, "master seed");
        workers_opt[name] = sub->add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);
        trials_opt[name] = sub->add_option("--trials", trials, "fixed trials per sweep point")->check(CLI::Range(100L, 100000000L));
        subs[name] = sub;
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    for (const auto& [name, sub] : subs) {
        if (!sub->parsed()) continue;
        aqem::Overrides ov;
        if (preset == "desk") ov.preset = aqem::Preset::desk;
        if (preset == "paper") ov.preset = aqem::Preset::paper;
        if (seed_opt[name]->count()) ov.seed = seed;
        if (workers_opt[name]->count()) ov.workers = workers;
        if (trials_opt[name]->count()) ov.trials = trials;
        try {
            const auto cfg = aqem::load_config(config_path, ov);
            std::cerr << name << ": config " << cfg.hash << ", seed " << cfg.seed << '\n';
            commands.at(name)(cfg, std::cout);
        } catch (const aqem::ConfigError& e) {
            std::cerr << "config error: " << e.what() << '\n';
            return 2;
        } catch (const aqem::MissingInputError& e) {
            std::cerr << "missing input: " << e.what() << '\n';
            return 3;
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << '\n';
            return 1;
        }
    }
    return 0;
}
