#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "degwave/cli.hpp"

namespace {

struct Flags {
    std::string config;
    bool conservative = false;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<double> tol;
};

void add_flags(CLI::App* sub, Flags& f) {
    sub->add_option("--config", f.config, "run configuration file")->required();
    sub->add_flag("--conservative", f.conservative, "use the closed-form Hardy-Poincare bound in every constant");
    sub->add_option("--seed", f.seed, "seed for randomized suites");
    sub->add_option("--out", f.out, "output directory");
    sub->add_option("--tol", f.tol, "main tolerance of the subcommand");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Numerical laboratory for degenerate/singular wave equations with drift and boundary null control"};
    app.require_subcommand(1);
    Flags flags;
    const char* names[] = {"report", "simulate", "observe", "control", "sweep"};
    const char* help[] = {"constants, Hardy-Poincare estimates and hypothesis verdicts",
                          "homogeneous run with energy and boundary-trace output",
                          "observability constant estimate and randomized inequality suite",
                          "HUM null control synthesis and verification",
                          "Cartesian parameter sweep of the report quantities"};
    for (int i = 0; i < 5; ++i) add_flags(app.add_subcommand(names[i], help[i]), flags);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return degwave::kConfigError;
    }

    const std::string cmd = app.get_subcommands().front()->get_name();
    try {
        auto cfg = degwave::load_run_config(flags.config);
        if (flags.conservative) cfg.conservative = true;
        if (flags.seed) cfg.seed = *flags.seed;
        if (flags.out) cfg.out_dir = *flags.out;
        if (flags.tol) {
            if (!(*flags.tol > 0.0)) throw degwave::ConfigError("--tol must be positive");
            if (cmd == "simulate") cfg.energy_tol = *flags.tol;
            if (cmd == "observe") cfg.inequality_tol = *flags.tol;
            if (cmd == "control") cfg.control_tol = *flags.tol;
        }
        if (cmd == "report") return degwave::cmd_report(cfg, std::cout);
        if (cmd == "simulate") return degwave::cmd_simulate(cfg, std::cout);
        if (cmd == "observe") return degwave::cmd_observe(cfg, std::cout);
        if (cmd == "control") return degwave::cmd_control(cfg, std::cout);
        return degwave::cmd_sweep(cfg, std::cout);
    } catch (const degwave::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return degwave::kConfigError;
    } catch (const degwave::NotPositive& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return degwave::kConfigError;
    } catch (const degwave::HypothesisViolated& e) {
        std::cerr << e.what() << '\n';
        return degwave::kViolation;
    } catch (const degwave::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return degwave::kViolation;
    }
}
