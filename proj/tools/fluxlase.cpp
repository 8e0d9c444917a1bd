// Command-line front end: run a config, evaluate a flux budget, or calibrate I.
// Exit status: 0 success, 1 invalid input, 2 numerical failure.

#include <cstdlib>
#include <string>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "fluxlase/fluxlase.hpp"
#include "fluxlase/io/experiments.hpp"

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitNumerical = 2;

void configure_logging() {
    spdlog::set_pattern("[%l] %v");
    const char* level = std::getenv("FLUXLASE_LOG");
    if (level == nullptr) {
        spdlog::set_level(spdlog::level::info);
        return;
    }
    const auto parsed = spdlog::level::from_str(level);
    // from_str maps unknown names to "off"; only accept that when asked for.
    if (parsed == spdlog::level::off && std::string(level) != "off") {
        spdlog::set_level(spdlog::level::info);
        spdlog::warn("unknown FLUXLASE_LOG level '{}', using info", level);
        return;
    }
    spdlog::set_level(parsed);
}

void report(const fluxlase::io::ExperimentResult& result) {
    spdlog::info("artifacts written to {}", result.output_dir);
    spdlog::debug("summary: {}", result.meta["summary"].dump());
}

int execute(fluxlase::io::ExperimentConfig config, const std::string& out) {
    spdlog::info("running experiment '{}'", fluxlase::io::to_string(config.experiment));
    const auto result = fluxlase::io::run_experiment(std::move(config), out);
    report(result);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    configure_logging();

    CLI::App app{"Spectral carrier kinetics and laser pumping experiments"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    auto* run = app.add_subcommand("run", "Run the experiment described by a JSON config");
    run->add_option("--config", config_path, "Config file")->required();
    run->add_option("--out", out_dir, "Output directory (overrides run.output_dir)");

    double omega_l = 0.0, omega_0 = 0.0, omega_r = 0.0, q0 = 0.0;
    auto* budget = app.add_subcommand("budget", "Flux budget around an injection point");
    budget->add_option("--omega-l", omega_l, "Laser sink energy")->required();
    budget->add_option("--omega-0", omega_0, "Injection energy")->required();
    budget->add_option("--omega-r", omega_r, "Heat sink energy")->required();
    budget->add_option("--q0", q0, "Injected carrier flux")->required();
    budget->add_option("--out", out_dir, "Output directory");

    double target_fs = 100.0;
    auto* calibrate = app.add_subcommand("calibrate", "Calibrate the collision strength I");
    calibrate->add_option("--target-fs", target_fs, "Target relaxation time in fs");
    calibrate->add_option("--config", config_path, "Config providing grid, params and initial state")->required();
    calibrate->add_option("--out", out_dir, "Output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitValidation;
    }

    try {
        if (*run) return execute(fluxlase::io::load_config(config_path), out_dir);
        if (*budget) {
            auto c = fluxlase::io::defaults_for(fluxlase::io::Experiment::budget);
            c.budget = {omega_l, omega_0, omega_r, q0};
            const auto result = fluxlase::io::run_experiment(c, out_dir);
            const auto& s = result.meta["summary"];
            spdlog::info("q_l={} q_r={} p_l={} p_r={}", s["q_l"].get<double>(), s["q_r"].get<double>(),
                         s["p_l"].get<double>(), s["p_r"].get<double>());
            report(result);
            return 0;
        }
        if (*calibrate) {
            auto c = fluxlase::io::load_config(config_path);
            c.experiment = fluxlase::io::Experiment::calibrate;
            c.calibrate.target_fs = target_fs;
            const auto result = fluxlase::io::run_experiment(c, out_dir);
            spdlog::info("calibrated I = {}", result.meta["summary"]["I"].get<double>());
            report(result);
            return 0;
        }
    } catch (const fluxlase::ConfigError& e) {
        spdlog::error("invalid config: {}", e.what());
        return kExitValidation;
    } catch (const fluxlase::DomainError& e) {
        spdlog::error("invalid input: {}", e.what());
        return kExitValidation;
    } catch (const fluxlase::NumericalError& e) {
        spdlog::error("numerical failure: {}", e.what());
        return kExitNumerical;
    } catch (const fluxlase::InvariantError& e) {
        spdlog::error("invariant violated: {}", e.what());
        return kExitNumerical;
    } catch (const fluxlase::Error& e) {
        spdlog::error("{}", e.what());
        return kExitValidation;
    }
    return 0;
}
