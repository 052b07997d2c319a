#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "cbfe/objectives.hpp"
#include "cbfe/tmaze.hpp"

namespace cbfe {

struct AgentConfig {
    Objective objective = Objective::Cbfe;
    int horizon = 2;
    RestartMode restart_mode = RestartMode::ModeInit;  // CBFE only
    std::uint64_t tie_break_seed = 0;
};

// Rolling filtering state: the prior over the previous latent state and the
// current trial time.
struct AgentState {
    Categorical prior;
    int time = 1;
};

struct PlanResult {
    Policy policy;                        // free-energy argmin (ties randomized)
    std::vector<FreeEnergyReport> grid;   // one report per candidate policy
};

struct StepRecord {
    Policy planned;
    int action = 0;       // executed control, 1-based position label
    int observation = 0;  // flat observation index
    std::vector<FreeEnergyReport> grid;
};

struct Trajectory {
    std::vector<StepRecord> steps;
    double expected_reward = 0.0;
};

struct LandscapeResult {
    std::vector<double> alphas;
    std::vector<double> utilities;
    // rewards[i * utilities.size() + j]: average reward at (alphas[i], utilities[j]).
    std::vector<double> rewards;

    double reward_at(std::size_t i, std::size_t j) const {
        return rewards[i * utilities.size() + j];
    }
    int zero_cell_count(double tolerance = 1e-12) const;
};

// Deterministic seed derivation so landscape cells are independent of thread
// scheduling.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                       std::uint64_t c = 0);

// Evaluates the configured objective for every candidate control sequence and
// returns the argmin; candidates within 1e-9 of the minimum are tied and one
// is drawn uniformly from `rng`.
PlanResult plan(const AgentState& state, const ModelSpec& spec,
                const AgentConfig& config, std::mt19937_64& rng);

// First control of the policy, as a 1-based action label.
int act(const Policy& policy);

// Exact single-step filtering: d_t proportional to
// (A^T one_hot(observation)) .* (B_action d_{t-1}).
AgentState slide(const AgentState& state, const ModelSpec& spec, int action,
                 int observation);

// Runs plan -> act -> execute -> observe -> slide for `moves` steps against a
// fresh environment and reports the trajectory and final expected reward.
Trajectory run_trial(const AgentConfig& config, double alpha, double utility,
                     int reward_arm, int moves, std::uint64_t seed);

// Average expected reward per (alpha, utility) cell over `runs_per_cell`
// seeded trials. `threads` <= 0 selects hardware concurrency.
LandscapeResult run_landscape(const AgentConfig& config,
                              const std::vector<double>& alphas,
                              const std::vector<double>& utilities,
                              int runs_per_cell, int reward_arm, int moves,
                              std::uint64_t seed, int threads = 0);

}  // namespace cbfe
