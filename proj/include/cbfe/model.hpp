#pragma once

#include <cstddef>
#include <map>
#include <vector>

#include "cbfe/dist.hpp"

namespace cbfe {

// A fixed sequence of future controls over the planning horizon.
struct Policy {
    std::vector<int> controls;  // 0-based control indices

    int horizon() const { return static_cast<int>(controls.size()); }
    bool operator==(const Policy&) const = default;
};

// Discrete generative model for a planning window: observation matrix A,
// control-indexed transition matrices B, initial state prior, and goal
// priors over observations indexed by absolute time.
struct ModelSpec {
    StochasticMatrix A;               // observations x states
    std::vector<StochasticMatrix> B;  // one states x states matrix per control
    Categorical d0;                   // initial state prior
    std::map<int, Categorical> goals; // absolute time k -> goal prior over observations
    int horizon = 1;                  // planning lookahead T
    int start_time = 1;               // absolute time of the first planned step
    double alpha = 0.0;               // reward probability
    double reward_utility = 0.0;      // goal-prior utility c

    std::size_t num_states() const { return A.cols(); }
    std::size_t num_observations() const { return A.rows(); }
    std::size_t num_controls() const { return B.size(); }

    // Goal prior for absolute time k; the window must define it.
    const Categorical& goal(int k) const;

    // Checks internal shape consistency; throws ModelError otherwise.
    void validate() const;
};

// Single-factor observation model with a clamped control: p(y | u) given by
// one column of a matrix. No transitions and no goal prior.
struct BanditModel {
    StochasticMatrix matrix;  // outcomes x controls

    std::size_t num_outcomes() const { return matrix.rows(); }
    std::size_t num_controls() const { return matrix.cols(); }
};

}  // namespace cbfe
