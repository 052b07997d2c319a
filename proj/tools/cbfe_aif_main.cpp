// Command-line experiment runner: free-energy tables and policy grids for a
// discrete planning agent, reward landscapes from interactive trials, and a
// self-checking verification suite.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "cbfe/output.hpp"

namespace {

using cbfe::output::ExperimentOutput;
using cbfe::output::Format;

struct CommonOpts {
    std::string format = "csv";
    std::string out_dir;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--format", opts.format, "Output format: csv, json or svg")
        ->check(CLI::IsMember({"csv", "json", "svg"}));
    cmd->add_option("--out", opts.out_dir, "Directory to write the output file into");
}

std::string extension(Format format) {
    switch (format) {
        case Format::Csv: return ".csv";
        case Format::Json: return ".json";
        case Format::Svg: return ".svg";
    }
    return ".txt";
}

int emit(const ExperimentOutput& output, const CommonOpts& opts,
         const std::string& stem) {
    const Format format = cbfe::output::format_from_string(opts.format);
    const std::string text = cbfe::output::render(output, format);
    if (opts.out_dir.empty()) {
        std::cout << text;
        return 0;
    }
    std::filesystem::create_directories(opts.out_dir);
    const auto path = std::filesystem::path(opts.out_dir) / (stem + extension(format));
    std::ofstream file(path, std::ios::binary);
    if (!file) {
        std::cerr << "cannot write " << path << "\n";
        return 1;
    }
    file << text;
    std::cout << path.string() << "\n";
    return 0;
}

cbfe::RestartMode restart_from_string(const std::string& name) {
    return name == "exhaustive" ? cbfe::RestartMode::Exhaustive
                                : cbfe::RestartMode::ModeInit;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Free-energy planning experiments on the T-maze"};
    app.require_subcommand(1);

    // bandit
    auto* bandit = app.add_subcommand("bandit", "Free energies per bandit policy");
    CommonOpts bandit_opts;
    add_common(bandit, bandit_opts);

    // grid
    auto* grid = app.add_subcommand("grid", "Per-policy free-energy grid");
    CommonOpts grid_opts;
    std::string grid_objective = "cbfe";
    double grid_alpha = 0.9, grid_c = 2.0;
    int grid_horizon = 2;
    std::string grid_restarts = "exhaustive";
    grid->add_option("--objective", grid_objective, "bfe, cbfe or efe")
        ->check(CLI::IsMember({"bfe", "cbfe", "efe"}));
    grid->add_option("--alpha", grid_alpha, "Reward probability");
    grid->add_option("--c", grid_c, "Reward utility");
    grid->add_option("--horizon", grid_horizon, "Planning lookahead");
    grid->add_option("--restarts", grid_restarts, "EM restarts: mode-init or exhaustive")
        ->check(CLI::IsMember({"mode-init", "exhaustive"}));
    add_common(grid, grid_opts);

    // decompose
    auto* decompose =
        app.add_subcommand("decompose", "Opportunity / risk / extrinsic grids");
    CommonOpts decompose_opts;
    double dec_alpha = 0.9, dec_c = 2.0;
    int dec_horizon = 2;
    decompose->add_option("--alpha", dec_alpha, "Reward probability");
    decompose->add_option("--c", dec_c, "Reward utility");
    decompose->add_option("--horizon", dec_horizon, "Planning lookahead");
    add_common(decompose, decompose_opts);

    // landscape
    auto* landscape =
        app.add_subcommand("landscape", "Average-reward landscape from trials");
    CommonOpts landscape_opts;
    cbfe::output::LandscapeParams params;
    std::string landscape_objective = "cbfe";
    std::string landscape_restarts = "mode-init";
    landscape->add_option("--objective", landscape_objective, "bfe, cbfe or efe")
        ->check(CLI::IsMember({"bfe", "cbfe", "efe"}));
    landscape->add_option("--alpha-min", params.alpha_min, "Smallest reward probability");
    landscape->add_option("--alpha-max", params.alpha_max, "Largest reward probability");
    landscape->add_option("--alpha-steps", params.alpha_steps, "Grid rows")
        ->check(CLI::PositiveNumber);
    landscape->add_option("--c-min", params.c_min, "Smallest reward utility");
    landscape->add_option("--c-max", params.c_max, "Largest reward utility");
    landscape->add_option("--c-steps", params.c_steps, "Grid columns")
        ->check(CLI::PositiveNumber);
    landscape->add_option("--runs", params.runs, "Trials per cell")
        ->check(CLI::PositiveNumber);
    landscape->add_option("--moves", params.moves, "Moves per trial")
        ->check(CLI::PositiveNumber);
    landscape->add_option("--horizon", params.horizon, "Planning lookahead")
        ->check(CLI::PositiveNumber);
    landscape->add_option("--reward-arm", params.reward_arm, "True reward arm (2 or 3)")
        ->check(CLI::IsMember({2, 3}));
    landscape->add_option("--seed", params.seed, "Base seed");
    landscape->add_option("--restarts", landscape_restarts,
                          "EM restarts: mode-init or exhaustive")
        ->check(CLI::IsMember({"mode-init", "exhaustive"}));
    landscape->add_option("--threads", params.threads,
                          "Worker threads (0 = hardware, capped by CBFE_AIF_THREADS)");
    add_common(landscape, landscape_opts);

    // verify
    auto* verify = app.add_subcommand("verify", "Run the oracle invariant suite");
    bool perturb = false;
    verify->add_flag("--perturb", perturb,
                     "Test mode: corrupt the engine model to prove checks can fail");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return 2;
    }

    try {
        if (bandit->parsed()) {
            return emit(cbfe::output::bandit_output(), bandit_opts, "bandit");
        }
        if (grid->parsed()) {
            return emit(cbfe::output::grid_output(
                            cbfe::objective_from_string(grid_objective), grid_alpha,
                            grid_c, grid_horizon, restart_from_string(grid_restarts)),
                        grid_opts, "grid_" + grid_objective);
        }
        if (decompose->parsed()) {
            return emit(cbfe::output::decompose_output(dec_alpha, dec_c, dec_horizon),
                        decompose_opts, "decompose");
        }
        if (landscape->parsed()) {
            params.objective = cbfe::objective_from_string(landscape_objective);
            params.restart_mode = restart_from_string(landscape_restarts);
            return emit(cbfe::output::landscape_output(params), landscape_opts,
                        "landscape_" + landscape_objective);
        }
        if (verify->parsed()) {
            const auto report = cbfe::output::run_verify(perturb);
            std::cout << cbfe::output::render_verify(report);
            return report.all_passed() ? 0 : 1;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
