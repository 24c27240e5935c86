// Command-line front end for considerate experiments.
//
//   considerate validate <config>
//   considerate solve <config> [-o result.json]
//   considerate sweep <config> [-o sweep.json] [-j jobs]
//   considerate render <result.json>
//
// Set CONSIDERATE_LOG=info|debug for progress on stderr.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "considerate/experiment.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Considerate planning: reward augmentation for other agents' welfare and agency"};
    app.require_subcommand(1);

    std::string config_path;
    std::string output_path;
    std::string result_path;
    unsigned jobs = 1;

    auto* validate = app.add_subcommand("validate", "Check a config, its map and the compiled MDP");
    validate->add_option("config", config_path, "Experiment config (JSON)")->required();

    auto* solve = app.add_subcommand("solve", "Solve a config and render the greedy trajectory");
    solve->add_option("config", config_path, "Experiment config (JSON)")->required();
    solve->add_option("-o,--output", output_path, "Write the run result here");

    auto* sweep = app.add_subcommand("sweep", "Solve every point of the config's sweep");
    sweep->add_option("config", config_path, "Experiment config (JSON)")->required();
    sweep->add_option("-o,--output", output_path, "Write the sweep result here");
    sweep->add_option("-j,--jobs", jobs, "Rows solved in parallel")->check(CLI::PositiveNumber);

    auto* render = app.add_subcommand("render", "Re-render a stored run or sweep result");
    render->add_option("result", result_path, "Result file written by solve or sweep")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : considerate::kExitIo;
    }

    const auto out_opt = output_path.empty() ? std::nullopt : std::optional<std::filesystem::path>(output_path);
    if (*validate) return considerate::cmd_validate(config_path, std::cout, std::cerr);
    if (*solve) return considerate::cmd_solve(config_path, out_opt, std::cout, std::cerr);
    if (*sweep) return considerate::cmd_sweep(config_path, out_opt, std::cout, std::cerr, jobs);
    if (*render) return considerate::cmd_render(result_path, std::cout, std::cerr);
    return considerate::kExitIo;
}
