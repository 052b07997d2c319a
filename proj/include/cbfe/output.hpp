#pragma once

#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "cbfe/agent.hpp"
#include "cbfe/objectives.hpp"

namespace cbfe {
namespace output {

inline constexpr const char* kToolVersion = "0.1.0";

enum class Format { Csv, Json, Svg };
Format format_from_string(const std::string& name);

// A labeled numeric grid plus the cells marked as optimal for it.
struct GridPayload {
    std::string title;
    std::string mark_meaning;  // e.g. "argmin"
    std::vector<std::string> row_labels;
    std::vector<std::string> col_labels;
    std::vector<double> values;  // row-major
    std::vector<std::pair<int, int>> marks;  // 0-based (row, col)

    double at(std::size_t r, std::size_t c) const {
        return values[r * col_labels.size() + c];
    }
};

struct ExperimentOutput {
    nlohmann::json metadata;  // command, parameters, seed, version
    std::vector<GridPayload> grids;
    std::vector<std::string> footnotes;
};

std::string render_csv(const ExperimentOutput& out);
std::string render_json(const ExperimentOutput& out);
std::string render_svg(const ExperimentOutput& out);
std::string render(const ExperimentOutput& out, Format format);

// ---------------------------------------------------------------------------
// Experiment drivers
// ---------------------------------------------------------------------------

// Free energies per bandit policy (bits): one row per control, BFE and CBFE
// columns.
ExperimentOutput bandit_output();

// Free-energy grid over all candidate policies: first move on rows, second
// move on columns, argmin cells marked.
ExperimentOutput grid_output(Objective objective, double alpha, double utility,
                             int horizon = 2,
                             RestartMode restart_mode = RestartMode::Exhaustive);

// Opportunity, risk and extrinsic-value grids from converged constrained
// runs; each grid marks its own optimum.
ExperimentOutput decompose_output(double alpha, double utility, int horizon = 2,
                                  RestartMode restart_mode = RestartMode::Exhaustive);

struct LandscapeParams {
    Objective objective = Objective::Cbfe;
    double alpha_min = 0.5, alpha_max = 1.0;
    int alpha_steps = 10;
    double c_min = 0.0, c_max = 2.0;
    int c_steps = 10;
    int runs = 10;
    int moves = 2;
    int horizon = 2;
    int reward_arm = 3;
    std::uint64_t seed = 0;
    RestartMode restart_mode = RestartMode::ModeInit;
    int threads = 0;  // <= 0: hardware concurrency, capped by CBFE_AIF_THREADS
};

// Average-reward landscape over the (alpha, utility) grid; the metadata
// carries the zero-reward cell count for cross-agent comparison.
ExperimentOutput landscape_output(const LandscapeParams& params);

// Thread budget after applying the CBFE_AIF_THREADS cap.
int resolve_threads(int requested);

// Evenly spaced grid including both endpoints (a single step yields the
// midpoint of the range).
std::vector<double> linspace(double lo, double hi, int steps);

// ---------------------------------------------------------------------------
// Verification suite
// ---------------------------------------------------------------------------

struct CheckResult {
    std::string name;
    bool passed = false;
    double max_deviation = 0.0;
    std::string detail;
};

struct VerifyReport {
    std::vector<CheckResult> checks;
    bool all_passed() const;
};

// Runs the full invariant suite: evidence exactness of the unconstrained
// optimum, constrained-optimum oracle equivalence, decomposition identities,
// the epistemic-value bound along EM iterates, and the two-route
// expected-free-energy agreement. `inject_perturbation` corrupts the
// engine-side observation model to prove the harness can fail.
VerifyReport run_verify(bool inject_perturbation = false);

std::string render_verify(const VerifyReport& report);

}  // namespace output
}  // namespace cbfe
