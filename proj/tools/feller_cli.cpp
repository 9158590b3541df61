#include "feller/harness.hpp"

#include <CLI11.hpp>
#include <omp.h>

#include <iostream>
#include <map>

int main(int argc, char** argv) {
    CLI::App app{"Diffusions with instantaneous return: solvers, evolution, invariant measures"};
    app.require_subcommand(1);
    app.fallthrough();
    std::string config_path;
    std::string out_dir = "out";
    std::optional<std::uint64_t> seed;
    std::optional<int> jobs;
    app.add_option("--config", config_path, "INI configuration file")->required();
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--seed", seed, "overrides run.seed");
    app.add_option("--jobs", jobs, "OpenMP threads (overrides run.jobs)")->check(CLI::NonNegativeNumber);
    const std::map<std::string, std::string> about{
        {"grid", "write the truncated grid and its boundary measure"},
        {"solve", "resolvent solve by monotone exhaustion"},
        {"evolve", "evolve an initial function with the implicit semigroup"},
        {"lyapunov", "check or build a Lyapunov function"},
        {"invariant", "invariant measure by Abel limit, eigenvector or evolution"},
        {"simulate", "Monte Carlo paths with instantaneous return"},
        {"verify", "run the property suite"},
        {"compare", "PDE evolution against Monte Carlo"},
    };
    for (const std::string& name : feller::subcommands()) {
        const auto it = about.find(name);
        app.add_subcommand(name, it == about.end() ? std::string() : it->second);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : feller::exit_config_error;
    }

    feller::RunConfig config;
    try {
        config = feller::load_config(config_path);
    } catch (const feller::ConfigError& e) {
        std::cerr << "configuration error [" << e.key() << "]: " << e.what() << '\n';
        return feller::exit_config_error;
    }
    if (seed) config.seed = *seed;
    if (jobs) config.jobs = *jobs;
    if (config.jobs > 0) omp_set_num_threads(config.jobs);

    return feller::run(app.get_subcommands().front()->get_name(), config, out_dir, std::cerr);
}
