#include "cbfe/tmaze.hpp"

#include <nlohmann/json.hpp>

#include "cbfe/errors.hpp"

namespace cbfe {
namespace tmaze {

namespace codec {

int state_index(int pos, int arm) {
    if (pos < 1 || pos > kNumPositions || arm < 2 || arm > 3) {
        throw DimensionError("codec: position or arm out of range");
    }
    return kNumArms * (pos - 1) + (arm - 2);
}

int pos_of_state(int s) { return s / kNumArms + 1; }
int arm_of_state(int s) { return s % kNumArms + 2; }

int observation_index(int pos, int outcome) {
    if (pos < 1 || pos > kNumPositions || outcome < 1 || outcome > kNumOutcomes) {
        throw DimensionError("codec: position or outcome out of range");
    }
    return kNumOutcomes * (pos - 1) + (outcome - 1);
}

int pos_of_observation(int y) { return y / kNumOutcomes + 1; }
int outcome_of_observation(int y) { return y % kNumOutcomes + 1; }

std::string observation_label(int y) {
    static const char* names[] = {"reward-indicated-at-2", "reward-indicated-at-3",
                                  "reward-obtained", "reward-not-obtained"};
    return std::string(names[outcome_of_observation(y) - 1]) + "@pos" +
           std::to_string(pos_of_observation(y));
}

std::string state_label(int s) {
    return "pos" + std::to_string(pos_of_state(s)) + "/arm" +
           std::to_string(arm_of_state(s));
}

}  // namespace codec

StochasticMatrix observation_matrix(double alpha) {
    const double a = alpha;
    // Per-position blocks: rows are outcomes, columns are reward arms.
    std::vector<StochasticMatrix> blocks = {
        StochasticMatrix({{0.5, 0.5}, {0.5, 0.5}, {0.0, 0.0}, {0.0, 0.0}}),
        StochasticMatrix({{0.0, 0.0}, {0.0, 0.0}, {a, 1 - a}, {1 - a, a}}),
        StochasticMatrix({{0.0, 0.0}, {0.0, 0.0}, {1 - a, a}, {a, 1 - a}}),
        StochasticMatrix({{1.0, 0.0}, {0.0, 1.0}, {0.0, 0.0}, {0.0, 0.0}}),
    };
    return direct_sum(blocks);
}

std::vector<StochasticMatrix> transition_matrices() {
    // Position moves (from column to row); arms 2 and 3 absorb.
    const StochasticMatrix m1({{1, 0, 0, 1}, {0, 1, 0, 0}, {0, 0, 1, 0}, {0, 0, 0, 0}});
    const StochasticMatrix m2({{0, 0, 0, 0}, {1, 1, 0, 1}, {0, 0, 1, 0}, {0, 0, 0, 0}});
    const StochasticMatrix m3({{0, 0, 0, 0}, {0, 1, 0, 0}, {1, 0, 1, 1}, {0, 0, 0, 0}});
    const StochasticMatrix m4({{0, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 1, 0}, {1, 0, 0, 1}});
    const StochasticMatrix eye = StochasticMatrix::identity(kNumArms);
    return {kronecker(m1, eye), kronecker(m2, eye), kronecker(m3, eye),
            kronecker(m4, eye)};
}

Categorical initial_state_prior() {
    return Categorical(kronecker({1.0, 0.0, 0.0, 0.0}, {0.5, 0.5}));
}

Categorical goal_prior(double reward_utility, int k) {
    if (k <= 1) return Categorical::uniform(kNumObservations);
    // Utility attaches to the outcome class at every position: reward
    // obtained scores +c, reward missed scores -c, cues are neutral.
    const std::vector<double> per_position{0.0, 0.0, reward_utility,
                                           -reward_utility};
    return softmax(kronecker({1.0, 1.0, 1.0, 1.0}, per_position));
}

ModelSpec build_tmaze_model(double alpha, double reward_utility, int horizon,
                            int start_time) {
    if (alpha < 0.0 || alpha > 1.0) {
        throw ModelError("build_tmaze_model: alpha outside [0, 1]");
    }
    ModelSpec spec{
        observation_matrix(alpha), transition_matrices(), initial_state_prior(),
        {},      horizon,          start_time,            alpha,
        reward_utility};
    for (int k = start_time; k < start_time + horizon; ++k) {
        spec.goals.emplace(k, goal_prior(reward_utility, k));
    }
    spec.validate();
    return spec;
}

BanditModel build_bandit_model() {
    return BanditModel{StochasticMatrix({{0.5, 1.0}, {0.5, 0.0}})};
}

TMazeEnv::TMazeEnv(int reward_arm, double alpha, std::uint64_t rng_seed)
    : reward_arm_(reward_arm), alpha_(alpha), rng_(rng_seed) {
    if (reward_arm != 2 && reward_arm != 3) {
        throw ModelError("TMazeEnv: reward arm must be 2 or 3");
    }
    if (alpha < 0.0 || alpha > 1.0) {
        throw ModelError("TMazeEnv: alpha outside [0, 1]");
    }
}

void TMazeEnv::execute(int action) {
    if (action < 1 || action > kNumPositions) {
        throw DimensionError("TMazeEnv: action out of range");
    }
    if (agent_pos_ == 2 || agent_pos_ == 3) return;  // absorbing arms
    agent_pos_ = action;
}

int TMazeEnv::observe() {
    const StochasticMatrix a = observation_matrix(alpha_);
    const std::vector<double> column =
        a.column(codec::state_index(agent_pos_, reward_arm_));
    // Inverse-CDF draw on a 53-bit uniform; avoids distribution objects whose
    // output is implementation-defined.
    const double u =
        static_cast<double>(rng_() >> 11) * 0x1.0p-53;
    double cum = 0.0;
    int last_positive = 0;
    for (int y = 0; y < static_cast<int>(column.size()); ++y) {
        if (column[y] <= 0.0) continue;
        last_positive = y;
        cum += column[y];
        if (u < cum) return y;
    }
    return last_positive;
}

double TMazeEnv::expected_reward() const {
    if (agent_pos_ == reward_arm_) return alpha_;
    if (agent_pos_ == 2 || agent_pos_ == 3) return 1.0 - alpha_;
    return 0.0;
}

namespace {

nlohmann::json matrix_to_json(const StochasticMatrix& m) {
    return nlohmann::json(m.to_nested());
}

StochasticMatrix matrix_from_json(const nlohmann::json& j) {
    return StochasticMatrix(j.get<std::vector<std::vector<double>>>());
}

}  // namespace

std::string model_spec_to_json(const ModelSpec& spec) {
    nlohmann::json j;
    j["A"] = matrix_to_json(spec.A);
    j["B"] = nlohmann::json::array();
    for (const auto& b : spec.B) j["B"].push_back(matrix_to_json(b));
    j["d0"] = spec.d0.probs();
    j["goals"] = nlohmann::json::object();
    for (const auto& [k, goal] : spec.goals) {
        j["goals"][std::to_string(k)] = goal.probs();
    }
    j["horizon"] = spec.horizon;
    j["start_time"] = spec.start_time;
    j["alpha"] = spec.alpha;
    j["c"] = spec.reward_utility;
    return j.dump(2);
}

ModelSpec model_spec_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    std::vector<StochasticMatrix> b;
    for (const auto& m : j.at("B")) b.push_back(matrix_from_json(m));
    ModelSpec spec{matrix_from_json(j.at("A")),
                   std::move(b),
                   Categorical(j.at("d0").get<std::vector<double>>()),
                   {},
                   j.at("horizon").get<int>(),
                   j.at("start_time").get<int>(),
                   j.at("alpha").get<double>(),
                   j.at("c").get<double>()};
    for (const auto& [key, value] : j.at("goals").items()) {
        spec.goals.emplace(std::stoi(key),
                           Categorical(value.get<std::vector<double>>()));
    }
    spec.validate();
    return spec;
}

}  // namespace tmaze
}  // namespace cbfe
