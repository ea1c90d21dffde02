#include "rbsim/commands.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <string>

int main(int argc, char** argv) {
    CLI::App app{"Dual-port reconfigurable battery: design, analysis and simulation"};
    app.set_version_flag("--version", std::string("rbsim ") + rbsim::kToolVersion);

    std::string command;
    rbsim::CommandOptions opt;
    std::string config;
    std::string out = ".";
    double dt = 0.0;

    app.add_option("command", command, "design | analyze | simulate | sweep")
        ->required()
        ->check(CLI::IsMember({"design", "analyze", "simulate", "sweep"}));
    app.add_option("--config", config, "experiment JSON file")->required()->check(CLI::ExistingFile);
    app.add_option("--out", out, "output directory (created if missing)");
    app.add_flag("--simulate", opt.simulate, "analyze: add fixed-m simulated gain columns");
    auto* dt_opt = app.add_option("--dt", dt, "time step override [s]")->check(CLI::PositiveNumber);
    app.add_option("--seed", opt.seed, "seed for randomized sweeps");
    app.add_option("--jobs", opt.jobs, "worker threads for sweeps and --simulate")
        ->check(CLI::Range(1u, 1024u));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : rbsim::exit_fault;
    }

    opt.config_path = config;
    opt.out_dir = out;
    if (dt_opt->count() > 0) opt.dt = dt;
    return rbsim::run_command(command, opt);
}
