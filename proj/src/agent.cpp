#include "cbfe/agent.hpp"

#include <atomic>
#include <cmath>
#include <thread>

#include "cbfe/errors.hpp"

namespace cbfe {

namespace {

constexpr double kTieTolerance = 1e-9;

// Uniform draw on [0, 1) from the generator's top 53 bits; keeps results
// identical across standard library implementations.
double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
    auto i = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n));
    return i < n ? i : n - 1;
}

}  // namespace

int LandscapeResult::zero_cell_count(double tolerance) const {
    int count = 0;
    for (double r : rewards) {
        if (r <= tolerance) ++count;
    }
    return count;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                       std::uint64_t c) {
    // splitmix64 over the combined words
    std::uint64_t x = seed;
    for (std::uint64_t w : {a, b, c}) {
        x += 0x9e3779b97f4a7c15ULL + w;
        std::uint64_t z = x;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        x = z ^ (z >> 31);
    }
    return x;
}

PlanResult plan(const AgentState& state, const ModelSpec& spec,
                const AgentConfig& config, std::mt19937_64& rng) {
    if (config.horizon < 1) throw ModelError("plan: horizon must be positive");
    PlanResult result;
    const std::vector<Policy> candidates =
        enumerate_policies(spec.num_controls(), spec.horizon);
    result.grid.reserve(candidates.size());
    for (const Policy& policy : candidates) {
        switch (config.objective) {
            case Objective::Bfe:
                result.grid.push_back(optimize_bfe(spec, state.prior, policy));
                break;
            case Objective::Cbfe:
                result.grid.push_back(
                    optimize_cbfe(spec, state.prior, policy, config.restart_mode));
                break;
            case Objective::Efe: {
                FreeEnergyReport report;
                report.objective = Objective::Efe;
                report.value = efe(spec, state.prior, policy);
                result.grid.push_back(std::move(report));
                break;
            }
        }
    }

    double minimum = result.grid.front().value;
    for (const auto& report : result.grid) minimum = std::min(minimum, report.value);
    std::vector<std::size_t> tied;
    for (std::size_t i = 0; i < result.grid.size(); ++i) {
        if (result.grid[i].value <= minimum + kTieTolerance) tied.push_back(i);
    }
    result.policy = candidates[tied[uniform_index(rng, tied.size())]];
    return result;
}

int act(const Policy& policy) {
    if (policy.controls.empty()) throw ModelError("act: empty policy");
    return policy.controls.front() + 1;
}

AgentState slide(const AgentState& state, const ModelSpec& spec, int action,
                 int observation) {
    const int u = action - 1;
    if (u < 0 || static_cast<std::size_t>(u) >= spec.num_controls()) {
        throw DimensionError("slide: action out of range");
    }
    if (observation < 0 ||
        static_cast<std::size_t>(observation) >= spec.num_observations()) {
        throw DimensionError("slide: observation out of range");
    }
    std::vector<double> predicted = spec.B[u].apply(state.prior.probs());
    std::vector<double> likelihood = spec.A.row(observation);
    double sum = 0.0;
    for (std::size_t x = 0; x < predicted.size(); ++x) {
        predicted[x] *= likelihood[x];
        sum += predicted[x];
    }
    if (!(sum > 0.0)) {
        throw InconsistencyError("x" + std::to_string(state.time));
    }
    for (double& v : predicted) v /= sum;
    return AgentState{Categorical(std::move(predicted)), state.time + 1};
}

Trajectory run_trial(const AgentConfig& config, double alpha, double utility,
                     int reward_arm, int moves, std::uint64_t seed) {
    if (moves < 1) throw ModelError("run_trial: at least one move required");
    tmaze::TMazeEnv env(reward_arm, alpha, mix_seed(seed, 0x0b5e7e));
    std::mt19937_64 tie_rng(mix_seed(seed, config.tie_break_seed, 0x71e));

    Trajectory trajectory;
    AgentState state{tmaze::initial_state_prior(), 1};
    for (int t = 1; t <= moves; ++t) {
        const ModelSpec spec =
            tmaze::build_tmaze_model(alpha, utility, config.horizon, t);
        PlanResult planned = plan(state, spec, config, tie_rng);
        const int action = act(planned.policy);
        env.execute(action);
        const int observation = env.observe();
        state = slide(state, spec, action, observation);
        trajectory.steps.push_back(StepRecord{std::move(planned.policy), action,
                                              observation,
                                              std::move(planned.grid)});
    }
    trajectory.expected_reward = env.expected_reward();
    return trajectory;
}

LandscapeResult run_landscape(const AgentConfig& config,
                              const std::vector<double>& alphas,
                              const std::vector<double>& utilities,
                              int runs_per_cell, int reward_arm, int moves,
                              std::uint64_t seed, int threads) {
    if (alphas.empty() || utilities.empty()) {
        throw DimensionError("run_landscape: empty parameter grid");
    }
    if (runs_per_cell < 1) throw ModelError("run_landscape: runs_per_cell < 1");

    LandscapeResult result;
    result.alphas = alphas;
    result.utilities = utilities;
    result.rewards.assign(alphas.size() * utilities.size(), 0.0);

    if (threads <= 0) {
        threads = static_cast<int>(std::thread::hardware_concurrency());
        if (threads <= 0) threads = 1;
    }
    const std::size_t cells = result.rewards.size();
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t cell = next.fetch_add(1); cell < cells;
             cell = next.fetch_add(1)) {
            const std::size_t i = cell / utilities.size();
            const std::size_t j = cell % utilities.size();
            double total = 0.0;
            for (int run = 0; run < runs_per_cell; ++run) {
                const std::uint64_t trial_seed = mix_seed(seed, i, j, run);
                total += run_trial(config, alphas[i], utilities[j], reward_arm,
                                   moves, trial_seed)
                             .expected_reward;
            }
            result.rewards[cell] = total / runs_per_cell;
        }
    };
    std::vector<std::thread> pool;
    for (int k = 1; k < threads; ++k) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    return result;
}

}  // namespace cbfe
