#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cbfe/graph.hpp"
#include "cbfe/model.hpp"

namespace cbfe {

enum class Objective { Bfe, Cbfe, Efe };

std::string to_string(Objective objective);
Objective objective_from_string(const std::string& name);

struct FreeEnergyReport {
    Objective objective = Objective::Bfe;
    double value = 0.0;  // bits
    // Optimized point-mass outcomes, present for CBFE only.
    std::optional<std::vector<std::size_t>> optimal_outcomes;
    bool converged = true;
    int sweeps = 0;
};

// How the expectation-maximization over predicted outcomes is seeded:
// ModeInit starts from the modes of the unconstrained marginals; Exhaustive
// restarts from every joint outcome assignment and keeps the best result.
enum class RestartMode { ModeInit, Exhaustive };

// Enumeration guard for the brute-force oracles.
inline constexpr double kEnumerationGuard = 1e7;

// ---------------------------------------------------------------------------
// Free energy of beliefs on a graph
// ---------------------------------------------------------------------------

// Bethe free energy in bits: per-factor average energies minus the Bethe
// entropy. Point-mass beliefs contribute zero entropy. Belief mass on
// zero-probability factor entries yields +infinity, never NaN.
double bethe_free_energy(const FactorGraph& graph, const BeliefState& beliefs);

// ---------------------------------------------------------------------------
// Per-policy optimization
// ---------------------------------------------------------------------------

struct BfeSolution {
    FreeEnergyReport report;
    FactorGraph graph;
    FutureModelLayout layout;
    BeliefState beliefs;
};

struct CbfeSolution {
    FreeEnergyReport report;
    FactorGraph graph;
    FutureModelLayout layout;
    BeliefState beliefs;
    // Per-sweep snapshots of the winning restart (outcomes are the values
    // each sweep was computed with).
    std::vector<BeliefState> sweep_history;
};

// Sum-product on the unconstrained future model; on these tree models the
// optimum equals the negative log evidence of the policy.
BfeSolution solve_bfe(const ModelSpec& spec, const Categorical& prior,
                      const Policy& policy);
FreeEnergyReport optimize_bfe(const ModelSpec& spec, const Categorical& prior,
                              const Policy& policy);

// Expectation maximization on the observation-constrained future model.
CbfeSolution solve_cbfe(const ModelSpec& spec, const Categorical& prior,
                        const Policy& policy, RestartMode restart_mode);
FreeEnergyReport optimize_cbfe(const ModelSpec& spec, const Categorical& prior,
                               const Policy& policy, RestartMode restart_mode);

// Bandit variants of the same machinery.
BfeSolution solve_bandit_bfe(const BanditModel& model, int control);
CbfeSolution solve_bandit_cbfe(const BanditModel& model, int control,
                               RestartMode restart_mode);

// ---------------------------------------------------------------------------
// Value decompositions
// ---------------------------------------------------------------------------

struct CbfeDecomposition {
    double opportunity = 0.0;               // E_q(x)[log2 p(yhat | x)]
    double risk = 0.0;                       // KL[q(x) || p(x | policy)]
    double extrinsic_value = 0.0;            // log2 of goal-prior mass at yhat
    double posterior_divergence = 0.0;       // KL[q(x) || p(x | yhat, policy)]
    double epistemic_value_of_policy = 0.0;  // log2 p(yhat | policy)
};

CbfeDecomposition cbfe_decompose(const ModelSpec& spec, const Categorical& prior,
                                 const Policy& policy, const FactorGraph& graph,
                                 const FutureModelLayout& layout,
                                 const BeliefState& beliefs,
                                 const std::vector<std::size_t>& outcomes);
CbfeDecomposition cbfe_decompose(const ModelSpec& spec, const Categorical& prior,
                                 const Policy& policy, const CbfeSolution& solution);

struct BfeDecomposition {
    double expected_divergence = 0.0;       // E_q(x)[KL[q(y|x) || p(y|x)]]
    double risk = 0.0;                      // KL[q(x) || p(x | policy)]
    double expected_extrinsic_value = 0.0;  // E_q(y)[log2 goal prior]
};

BfeDecomposition bfe_decompose(const ModelSpec& spec, const Categorical& prior,
                               const Policy& policy, const BfeSolution& solution);

// ---------------------------------------------------------------------------
// Expected free energy
// ---------------------------------------------------------------------------

// Forward filtering: p(x_tau | controls so far), excluding goal information.
Categorical posterior_predictive(const ModelSpec& spec, const Categorical& prior,
                                 const std::vector<int>& controls_prefix);

// Sum over the horizon of per-step ambiguity plus observation risk, in bits.
double efe(const ModelSpec& spec, const Categorical& prior, const Policy& policy);

// Instantaneous expected free energy of the last step of `controls_prefix`,
// computed two ways: (ambiguity + risk, direct enumeration over states and
// outcomes). The two values agree up to numerics.
std::pair<double, double> efe_instantaneous_check(const ModelSpec& spec,
                                                  const Categorical& prior,
                                                  const std::vector<int>& controls_prefix);

// ---------------------------------------------------------------------------
// Brute-force oracles (full enumeration, guarded)
// ---------------------------------------------------------------------------

// Model evidence Z by complete enumeration of states and observations.
double brute_force_evidence(const ModelSpec& spec, const Categorical& prior,
                            const Policy& policy);

// Exact constrained optimum: min over all outcome assignments of
// -log2[p(yhat | policy) * goal mass], with the minimizing assignment.
std::pair<double, std::vector<std::size_t>> brute_force_cbfe(
    const ModelSpec& spec, const Categorical& prior, const Policy& policy);

// All control sequences of the given horizon, first control most significant.
std::vector<Policy> enumerate_policies(std::size_t num_controls, int horizon);

}  // namespace cbfe
