#pragma once

#include <cstdint>
#include <random>
#include <string>

#include "cbfe/model.hpp"

namespace cbfe {
namespace tmaze {

// T-maze layout: four positions, the reward sits in arm 2 or 3, position 4
// shows a cue naming the reward arm. States pair (position, reward arm) and
// observations pair (position, outcome), both position-major.
inline constexpr int kNumPositions = 4;
inline constexpr int kNumArms = 2;
inline constexpr int kNumOutcomes = 4;
inline constexpr int kNumStates = kNumPositions * kNumArms;        // 8
inline constexpr int kNumObservations = kNumPositions * kNumOutcomes;  // 16

// Outcome labels (1-based): 1 reward indicated at 2, 2 reward indicated at 3,
// 3 reward obtained, 4 reward not obtained.
inline constexpr int kOutcomeCueLeft = 1;
inline constexpr int kOutcomeCueRight = 2;
inline constexpr int kOutcomeReward = 3;
inline constexpr int kOutcomeNoReward = 4;

// Bijective index maps between 1-based labels and 0-based flat indices.
namespace codec {

// pos in 1..4, arm in {2, 3} -> 0..7
int state_index(int pos, int arm);
int pos_of_state(int s);
int arm_of_state(int s);

// pos in 1..4, outcome in 1..4 -> 0..15
int observation_index(int pos, int outcome);
int pos_of_observation(int y);
int outcome_of_observation(int y);

std::string observation_label(int y);
std::string state_label(int s);

}  // namespace codec

// Generative model of the T-maze planning window starting at absolute time
// `start_time` with lookahead `horizon`. The goal prior is flat at time 1 and
// reward-shaped afterwards.
ModelSpec build_tmaze_model(double alpha, double reward_utility, int horizon,
                            int start_time = 1);

// The position-block observation matrix for a given reward probability.
StochasticMatrix observation_matrix(double alpha);
// The control-indexed transition bank (arms are absorbing).
std::vector<StochasticMatrix> transition_matrices();
// Initial belief: position 1 known, reward arm unknown.
Categorical initial_state_prior();
// Goal prior over observations for absolute time k.
Categorical goal_prior(double reward_utility, int k);

// Two-armed bandit observation model: control 0 is uninformative, control 1
// determines the outcome.
BanditModel build_bandit_model();

// Ground-truth environment (generative process). Independent of the agent's
// model; observation noise comes from the owned seeded generator.
class TMazeEnv {
  public:
    TMazeEnv(int reward_arm, double alpha, std::uint64_t rng_seed);

    int agent_pos() const { return agent_pos_; }
    int reward_arm() const { return reward_arm_; }
    double alpha() const { return alpha_; }

    // Applies an action (1..4). Arm positions are absorbing.
    void execute(int action);

    // Samples an outcome at the current position; returns the flat
    // observation index.
    int observe();

    // Probability of reward at the current position: alpha at the true arm,
    // 1 - alpha at the other arm, zero elsewhere.
    double expected_reward() const;

  private:
    int reward_arm_;
    int agent_pos_ = 1;
    double alpha_;
    std::mt19937_64 rng_;
};

// Serialization for golden-file tests: matrices as row-major arrays of
// arrays plus the scalar parameters.
std::string model_spec_to_json(const ModelSpec& spec);
ModelSpec model_spec_from_json(const std::string& text);

}  // namespace tmaze
}  // namespace cbfe
