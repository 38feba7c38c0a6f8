// Simulation front-end: scenario validation, CRLB sweeps, Monte Carlo
// experiment plans and residual-convergence studies.
//
// Exit codes: 0 success, 1 validation failure, 2 runtime error.

#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "vlp/harness.hpp"
#include "vlp/version.hpp"

namespace {

int cmd_validate(const std::string& scenario) {
    const vlp::ValidationReport rep = vlp::validate_scenario(scenario);
    std::cout << rep.text();
    return rep.ok() ? 0 : 1;
}

int cmd_crlb(const std::string& scenario_path, const std::string& out_dir,
             std::vector<double> powers, const std::string& variable) {
    vlp::ExperimentPlan plan;
    plan.scenario_path = scenario_path;
    plan.sweep_variable = variable == "vlc_power" ? vlp::SweepVariable::VlcPower
                                                  : vlp::SweepVariable::AnchorPower;
    plan.sweep_values = powers.empty() ? vlp::default_power_grid() : powers;
    plan.algorithms = {{vlp::AlgorithmKind::Crlb, true}};
    plan.output_dir = out_dir;
    const auto res = vlp::run_experiment(plan, 1);
    for (const auto& f : res.files_written) std::cout << "wrote " << out_dir << "/" << f << "\n";
    return 0;
}

int cmd_run(const std::string& plan_path, const std::string& scenario_override,
            std::uint64_t seed, bool seed_set, const std::string& out_override, int threads,
            bool residuals_only) {
    vlp::ExperimentPlan plan = vlp::load_plan(plan_path);
    if (!scenario_override.empty()) plan.scenario_path = scenario_override;
    if (seed_set) plan.seed = seed;
    if (!out_override.empty()) plan.output_dir = out_override;
    const auto res = vlp::run_experiment(plan, threads, residuals_only);
    for (const auto& f : res.files_written) {
        std::cout << "wrote " << plan.output_dir << "/" << f << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cooperative visible-light positioning simulator"};
    app.set_version_flag("--version", vlp::kVersion);
    app.require_subcommand(1);

    std::string scenario, plan_path, out_dir = "out", sweep_variable = "anchor_power";
    std::vector<double> powers;
    std::uint64_t seed = 0;
    int threads = 1;

    auto* validate = app.add_subcommand("validate", "check a scenario file against all invariants");
    validate->add_option("--scenario", scenario, "scenario file")->required();

    auto* crlb = app.add_subcommand("crlb", "write the CRLB power sweep for a scenario");
    crlb->add_option("--scenario", scenario, "scenario file")->required();
    crlb->add_option("--out", out_dir, "output directory");
    crlb->add_option("--powers", powers, "explicit power grid in watts");
    crlb->add_option("--variable", sweep_variable, "anchor_power or vlc_power");

    auto* run = app.add_subcommand("run", "execute an experiment plan");
    run->add_option("--plan", plan_path, "plan file")->required();
    run->add_option("--scenario", scenario, "override the plan's scenario");
    auto* seed_opt = run->add_option("--seed", seed, "override the plan's seed");
    run->add_option("--out", out_dir, "override the plan's output directory");
    run->add_option("--threads", threads, "Monte Carlo worker threads");

    auto* residuals = app.add_subcommand("residuals", "write only the residual convergence curves");
    residuals->add_option("--plan", plan_path, "plan file")->required();
    residuals->add_option("--scenario", scenario, "override the plan's scenario");
    auto* seed_opt2 = residuals->add_option("--seed", seed, "override the plan's seed");
    residuals->add_option("--out", out_dir, "override the plan's output directory");
    residuals->add_option("--threads", threads, "Monte Carlo worker threads");

    CLI11_PARSE(app, argc, argv);

    try {
        if (validate->parsed()) return cmd_validate(scenario);
        if (crlb->parsed()) return cmd_crlb(scenario, out_dir, powers, sweep_variable);
        if (run->parsed()) {
            return cmd_run(plan_path, scenario, seed, seed_opt->count() > 0,
                           run->count("--out") ? out_dir : "", threads, false);
        }
        if (residuals->parsed()) {
            return cmd_run(plan_path, scenario, seed, seed_opt2->count() > 0,
                           residuals->count("--out") ? out_dir : "", threads, true);
        }
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
