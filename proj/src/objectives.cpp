#include "cbfe/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cbfe/errors.hpp"

namespace cbfe {

namespace {

const double kLog2 = std::log(2.0);
const double kInf = std::numeric_limits<double>::infinity();

double entropy_nats(const std::vector<double>& q) {
    double h = 0.0;
    for (double v : q) {
        if (v > 0.0) h -= v * std::log(v);
    }
    return h;
}

// -sum q ln p with the 0 ln 0 = 0 convention; +inf when q has mass where p
// has none.
double cross_entropy_nats(const std::vector<double>& q,
                          const std::vector<double>& p) {
    double u = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
        if (q[i] == 0.0) continue;
        if (p[i] == 0.0) return kInf;
        u -= q[i] * std::log(p[i]);
    }
    return u;
}

std::vector<double> row_marginal(const std::vector<double>& joint,
                                 std::size_t rows, std::size_t cols) {
    std::vector<double> out(rows, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) out[r] += joint[r * cols + c];
    }
    return out;
}

std::vector<double> col_marginal(const std::vector<double>& joint,
                                 std::size_t rows, std::size_t cols) {
    std::vector<double> out(cols, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) out[c] += joint[r * cols + c];
    }
    return out;
}

}  // namespace

std::string to_string(Objective objective) {
    switch (objective) {
        case Objective::Bfe: return "bfe";
        case Objective::Cbfe: return "cbfe";
        case Objective::Efe: return "efe";
    }
    return "?";
}

Objective objective_from_string(const std::string& name) {
    if (name == "bfe") return Objective::Bfe;
    if (name == "cbfe") return Objective::Cbfe;
    if (name == "efe") return Objective::Efe;
    throw DimensionError("unknown objective '" + name + "'");
}

// ---------------------------------------------------------------------------
// Bethe free energy
// ---------------------------------------------------------------------------

double bethe_free_energy(const FactorGraph& graph, const BeliefState& beliefs) {
    if (!beliefs.executed()) {
        throw StateError("bethe_free_energy: schedule has not run yet");
    }
    double nats = 0.0;
    try {
        for (int n = 0; n < graph.num_nodes(); ++n) {
            const Node& node = graph.node(n);
            if (const auto* prior = std::get_if<CategoricalPriorNode>(&node.kind)) {
                Message q = beliefs.edge_belief(graph, node.edges[0]);
                nats += cross_entropy_nats(q, prior->params.probs()) - entropy_nats(q);
            } else if (const auto* goal = std::get_if<GoalPriorNode>(&node.kind)) {
                Message q = beliefs.edge_belief(graph, node.edges[0]);
                nats += cross_entropy_nats(q, goal->params.probs()) - entropy_nats(q);
            } else if (std::holds_alternative<DiscreteTransitionNode>(node.kind) ||
                       std::holds_alternative<MultiplexerNode>(node.kind)) {
                std::vector<double> joint = node_joint(graph, beliefs, n);
                const std::size_t cols = graph.edge(node.edges[0]).domain;
                const std::size_t rows = graph.edge(node.edges[1]).domain;
                std::vector<double> table(rows * cols);
                const auto* dt = std::get_if<DiscreteTransitionNode>(&node.kind);
                const StochasticMatrix& m =
                    dt ? dt->matrix
                       : std::get<MultiplexerNode>(node.kind)
                             .matrices[std::get<MultiplexerNode>(node.kind)
                                           .selector.index];
                for (std::size_t r = 0; r < rows; ++r) {
                    for (std::size_t c = 0; c < cols; ++c) {
                        table[r * cols + c] = m(r, c);
                    }
                }
                nats += cross_entropy_nats(joint, table) - entropy_nats(joint);
            } else if (std::holds_alternative<EqualityNode>(node.kind)) {
                // Diagonal joint: zero energy, entropy of the shared marginal.
                nats -= entropy_nats(beliefs.edge_belief(graph, node.edges[0]));
            }
            // Clamp nodes contribute nothing.
            if (nats == kInf) return kInf;
        }
        for (int e = 0; e < graph.num_edges(); ++e) {
            if (graph.edge(e).degree() == 2) {
                nats += entropy_nats(beliefs.edge_belief(graph, e));
            }
        }
    } catch (const InconsistencyError&) {
        // Beliefs cannot place mass consistently: infinite free energy.
        return kInf;
    }
    return nats / kLog2;
}

// ---------------------------------------------------------------------------
// Optimization
// ---------------------------------------------------------------------------

namespace {

FreeEnergyReport make_report(Objective objective, double value,
                             const ScheduleResult& run,
                             const std::vector<int>& y_edges,
                             const BeliefState& beliefs) {
    FreeEnergyReport report;
    report.objective = objective;
    report.value = value;
    report.converged = run.converged;
    report.sweeps = run.sweeps;
    if (objective == Objective::Cbfe) {
        std::vector<std::size_t> outcomes;
        for (int e : y_edges) outcomes.push_back(*beliefs.outcome(e));
        report.optimal_outcomes = std::move(outcomes);
    }
    return report;
}

// Modes of the unconstrained sum-product marginals over the target edges.
std::vector<std::size_t> mode_init(const FactorGraph& unconstrained,
                                   const std::vector<int>& y_edges) {
    Schedule sch = make_schedule(unconstrained);
    ScheduleResult run = run_schedule(unconstrained, sch, kDefaultMaxSweeps, {});
    std::vector<std::size_t> init;
    for (int e : y_edges) {
        init.push_back(marginal(unconstrained, run.beliefs, e).argmax());
    }
    return init;
}

std::vector<std::vector<std::size_t>> exhaustive_inits(const FactorGraph& graph,
                                                       const std::vector<int>& targets) {
    double total = 1.0;
    for (int e : targets) total *= static_cast<double>(graph.edge(e).domain);
    if (total > kEnumerationGuard) {
        throw EnumerationLimitError("exhaustive restarts exceed the size guard");
    }
    std::vector<std::vector<std::size_t>> inits;
    std::vector<std::size_t> current(targets.size(), 0);
    while (true) {
        inits.push_back(current);
        int i = static_cast<int>(targets.size()) - 1;
        for (; i >= 0; --i) {
            if (++current[i] < graph.edge(targets[i]).domain) break;
            current[i] = 0;
        }
        if (i < 0) break;
    }
    return inits;
}

CbfeSolution run_cbfe_restarts(FactorGraph graph, FutureModelLayout layout,
                               RestartMode restart_mode,
                               const std::vector<std::size_t>& seed_init) {
    Schedule schedule = make_schedule(graph);
    std::vector<std::vector<std::size_t>> inits;
    if (restart_mode == RestartMode::ModeInit) {
        inits.push_back(seed_init);
    } else {
        inits = exhaustive_inits(graph, schedule.em_targets);
    }

    CbfeSolution best;
    double best_value = kInf;
    bool found = false;
    for (const auto& init : inits) {
        ScheduleResult run;
        try {
            run = run_schedule(graph, schedule, kDefaultMaxSweeps, init);
        } catch (const InconsistencyError&) {
            continue;  // impossible outcome assignment; infinite free energy
        }
        double value = bethe_free_energy(graph, run.beliefs);
        if (value < best_value) {
            best_value = value;
            best.report = make_report(Objective::Cbfe, value, run, layout.y_edges,
                                      run.beliefs);
            best.beliefs = run.beliefs;
            best.sweep_history = std::move(run.sweep_history);
            found = true;
        }
    }
    if (!found) {
        // Every restart was inconsistent (possible under mode init when the
        // seeded outcomes are jointly impossible). Report an infinite value.
        best.report.objective = Objective::Cbfe;
        best.report.value = kInf;
        best.report.converged = false;
        best.report.sweeps = 0;
        best.report.optimal_outcomes = seed_init;
        best.beliefs = BeliefState(graph);
    }
    best.graph = std::move(graph);
    best.layout = std::move(layout);
    return best;
}

}  // namespace

BfeSolution solve_bfe(const ModelSpec& spec, const Categorical& prior,
                      const Policy& policy) {
    FutureModel fm = build_future_model(spec, prior, policy, false);
    Schedule schedule = make_schedule(fm.graph);
    ScheduleResult run = run_schedule(fm.graph, schedule, kDefaultMaxSweeps, {});
    double value = bethe_free_energy(fm.graph, run.beliefs);
    BfeSolution solution;
    solution.report = make_report(Objective::Bfe, value, run, {}, run.beliefs);
    solution.graph = std::move(fm.graph);
    solution.layout = std::move(fm.layout);
    solution.beliefs = std::move(run.beliefs);
    return solution;
}

FreeEnergyReport optimize_bfe(const ModelSpec& spec, const Categorical& prior,
                              const Policy& policy) {
    return solve_bfe(spec, prior, policy).report;
}

CbfeSolution solve_cbfe(const ModelSpec& spec, const Categorical& prior,
                        const Policy& policy, RestartMode restart_mode) {
    FutureModel fm = build_future_model(spec, prior, policy, true);
    std::vector<std::size_t> seed;
    if (restart_mode == RestartMode::ModeInit) {
        FutureModel unconstrained = build_future_model(spec, prior, policy, false);
        seed = mode_init(unconstrained.graph, unconstrained.layout.y_edges);
    }
    return run_cbfe_restarts(std::move(fm.graph), std::move(fm.layout),
                             restart_mode, seed);
}

FreeEnergyReport optimize_cbfe(const ModelSpec& spec, const Categorical& prior,
                               const Policy& policy, RestartMode restart_mode) {
    return solve_cbfe(spec, prior, policy, restart_mode).report;
}

BfeSolution solve_bandit_bfe(const BanditModel& model, int control) {
    BanditGraph bg = build_bandit_graph(model, control, false);
    Schedule schedule = make_schedule(bg.graph);
    ScheduleResult run = run_schedule(bg.graph, schedule, kDefaultMaxSweeps, {});
    double value = bethe_free_energy(bg.graph, run.beliefs);
    BfeSolution solution;
    solution.report = make_report(Objective::Bfe, value, run, {}, run.beliefs);
    solution.layout.y_edges = {bg.y_edge};
    solution.layout.observation_nodes = {bg.node};
    solution.graph = std::move(bg.graph);
    solution.beliefs = std::move(run.beliefs);
    return solution;
}

CbfeSolution solve_bandit_cbfe(const BanditModel& model, int control,
                               RestartMode restart_mode) {
    BanditGraph bg = build_bandit_graph(model, control, true);
    FutureModelLayout layout;
    layout.y_edges = {bg.y_edge};
    layout.observation_nodes = {bg.node};
    std::vector<std::size_t> seed;
    if (restart_mode == RestartMode::ModeInit) {
        BanditGraph unconstrained = build_bandit_graph(model, control, false);
        seed = mode_init(unconstrained.graph, {unconstrained.y_edge});
    }
    return run_cbfe_restarts(std::move(bg.graph), std::move(layout), restart_mode,
                             seed);
}

// ---------------------------------------------------------------------------
// Decompositions
// ---------------------------------------------------------------------------

namespace {

struct ChainBeliefs {
    // Pairwise transition beliefs q(x_k, x_{k-1}) as (rows, cols) tables.
    std::vector<std::vector<double>> pairwise;
    std::size_t states = 0;
};

ChainBeliefs chain_beliefs(const FactorGraph& graph,
                           const FutureModelLayout& layout,
                           const BeliefState& beliefs) {
    ChainBeliefs chain;
    for (int n : layout.transition_nodes) {
        chain.pairwise.push_back(node_joint(graph, beliefs, n));
        chain.states = graph.edge(graph.node(n).edges[0]).domain;
    }
    return chain;
}

// KL between the chain-factorized state belief and the policy-conditioned
// state predictive, in bits.
double chain_risk_bits(const ChainBeliefs& chain, const ModelSpec& spec,
                       const Categorical& prior, const Policy& policy) {
    const std::size_t s = chain.states;
    double bethe_entropy = 0.0;
    double energy = 0.0;  // E_q[ln p(x | policy)]
    for (std::size_t k = 0; k < chain.pairwise.size(); ++k) {
        const auto& joint = chain.pairwise[k];
        bethe_entropy += entropy_nats(joint);
        if (k + 1 < chain.pairwise.size()) {
            bethe_entropy -= entropy_nats(row_marginal(joint, s, s));
        }
        const StochasticMatrix& b = spec.B[policy.controls[k]];
        for (std::size_t r = 0; r < s; ++r) {
            for (std::size_t c = 0; c < s; ++c) {
                double q = joint[r * s + c];
                if (q == 0.0) continue;
                if (b(r, c) == 0.0) return kInf;
                energy += q * std::log(b(r, c));
            }
        }
    }
    const std::vector<double> q0 = col_marginal(chain.pairwise.front(), s, s);
    for (std::size_t c = 0; c < s; ++c) {
        if (q0[c] == 0.0) continue;
        if (prior[c] == 0.0) return kInf;
        energy += q0[c] * std::log(prior[c]);
    }
    return (-bethe_entropy - energy) / kLog2;
}

// log2 p(outcomes | policy) by complete enumeration over state paths.
double log_outcome_evidence_bits(const ModelSpec& spec, const Categorical& prior,
                                 const Policy& policy,
                                 const std::vector<std::size_t>& outcomes) {
    const std::size_t s = spec.num_states();
    const int T = spec.horizon;
    if (std::pow(static_cast<double>(s), T + 1) > kEnumerationGuard) {
        throw EnumerationLimitError("state-path enumeration exceeds the size guard");
    }
    double p = 0.0;
    std::vector<std::size_t> path(T + 1, 0);
    while (true) {
        double w = prior[path[0]];
        for (int k = 1; k <= T && w > 0.0; ++k) {
            w *= spec.B[policy.controls[k - 1]](path[k], path[k - 1]);
            w *= spec.A(outcomes[k - 1], path[k]);
        }
        p += w;
        int i = T;
        for (; i >= 0; --i) {
            if (++path[i] < s) break;
            path[i] = 0;
        }
        if (i < 0) break;
    }
    return p > 0.0 ? std::log2(p) : -kInf;
}

}  // namespace

CbfeDecomposition cbfe_decompose(const ModelSpec& spec, const Categorical& prior,
                                 const Policy& policy, const FactorGraph& graph,
                                 const FutureModelLayout& layout,
                                 const BeliefState& beliefs,
                                 const std::vector<std::size_t>& outcomes) {
    if (static_cast<int>(outcomes.size()) != spec.horizon) {
        throw DimensionError("cbfe_decompose: outcomes do not match the horizon");
    }
    CbfeDecomposition d;
    const double value = bethe_free_energy(graph, beliefs);

    d.risk = chain_risk_bits(chain_beliefs(graph, layout, beliefs), spec, prior,
                             policy);

    for (int k = 0; k < spec.horizon; ++k) {
        const int n = layout.observation_nodes[k];
        const std::vector<double> joint = node_joint(graph, beliefs, n);
        const std::size_t cols = graph.edge(graph.node(n).edges[0]).domain;
        const std::size_t rows = graph.edge(graph.node(n).edges[1]).domain;
        const std::vector<double> qx = col_marginal(joint, rows, cols);
        for (std::size_t c = 0; c < cols; ++c) {
            if (qx[c] > 0.0) d.opportunity += qx[c] * std::log2(spec.A(outcomes[k], c));
        }
        const Categorical& goal = spec.goal(spec.start_time + k);
        d.extrinsic_value += goal[outcomes[k]] > 0.0 ? std::log2(goal[outcomes[k]])
                                                     : -kInf;
    }

    d.epistemic_value_of_policy =
        log_outcome_evidence_bits(spec, prior, policy, outcomes);
    d.posterior_divergence =
        value + d.epistemic_value_of_policy + d.extrinsic_value;
    return d;
}

CbfeDecomposition cbfe_decompose(const ModelSpec& spec, const Categorical& prior,
                                 const Policy& policy,
                                 const CbfeSolution& solution) {
    if (!solution.report.optimal_outcomes) {
        throw StateError("cbfe_decompose: solution carries no outcomes");
    }
    return cbfe_decompose(spec, prior, policy, solution.graph, solution.layout,
                          solution.beliefs, *solution.report.optimal_outcomes);
}

BfeDecomposition bfe_decompose(const ModelSpec& spec, const Categorical& prior,
                               const Policy& policy, const BfeSolution& solution) {
    BfeDecomposition d;
    d.risk = chain_risk_bits(chain_beliefs(solution.graph, solution.layout,
                                           solution.beliefs),
                             spec, prior, policy);
    for (int k = 0; k < spec.horizon; ++k) {
        const int n = solution.layout.observation_nodes[k];
        const std::vector<double> joint = node_joint(solution.graph,
                                                     solution.beliefs, n);
        const std::size_t cols = solution.graph.edge(solution.graph.node(n).edges[0]).domain;
        const std::size_t rows = solution.graph.edge(solution.graph.node(n).edges[1]).domain;
        const std::vector<double> qx = col_marginal(joint, rows, cols);
        const Categorical& goal = spec.goal(spec.start_time + k);
        const Categorical qy = marginal(solution.graph, solution.beliefs,
                                        solution.layout.y_edges[k]);
        for (std::size_t y = 0; y < rows; ++y) {
            if (qy[y] == 0.0) continue;
            if (goal[y] == 0.0) {
                d.expected_extrinsic_value = -kInf;
                break;
            }
            d.expected_extrinsic_value += qy[y] * std::log2(goal[y]);
        }
        // E_q(x)[KL(q(y|x) || p(y|x))]
        for (std::size_t y = 0; y < rows; ++y) {
            for (std::size_t c = 0; c < cols; ++c) {
                const double qyx = joint[y * cols + c];
                if (qyx == 0.0) continue;
                d.expected_divergence +=
                    qyx * std::log2(qyx / (qx[c] * spec.A(y, c)));
            }
        }
    }
    return d;
}

// ---------------------------------------------------------------------------
// Expected free energy
// ---------------------------------------------------------------------------

Categorical posterior_predictive(const ModelSpec& spec, const Categorical& prior,
                                 const std::vector<int>& controls_prefix) {
    if (controls_prefix.empty()) {
        throw DimensionError("posterior_predictive: empty control prefix");
    }
    std::vector<double> state = prior.probs();
    for (int u : controls_prefix) {
        if (u < 0 || static_cast<std::size_t>(u) >= spec.num_controls()) {
            throw ModelError("posterior_predictive: control index out of range");
        }
        state = spec.B[u].apply(state);
    }
    return Categorical(std::move(state));
}

namespace {

// Ambiguity + observation risk of the step ending the prefix, in bits.
double efe_step_bits(const ModelSpec& spec, const Categorical& predictive,
                     const Categorical& goal) {
    double ambiguity = 0.0;
    for (std::size_t x = 0; x < spec.num_states(); ++x) {
        if (predictive[x] == 0.0) continue;
        ambiguity += predictive[x] * entropy(Categorical(spec.A.column(x)));
    }
    const Categorical py(spec.A.apply(predictive.probs()));
    return ambiguity + kl_divergence(py, goal);
}

}  // namespace

double efe(const ModelSpec& spec, const Categorical& prior, const Policy& policy) {
    if (policy.horizon() != spec.horizon) {
        throw ModelError("efe: policy length differs from horizon");
    }
    double bits = 0.0;
    Categorical predictive = prior;
    for (int k = 0; k < spec.horizon; ++k) {
        predictive = Categorical(spec.B[policy.controls[k]].apply(predictive.probs()));
        bits += efe_step_bits(spec, predictive, spec.goal(spec.start_time + k));
    }
    return bits;
}

std::pair<double, double> efe_instantaneous_check(
    const ModelSpec& spec, const Categorical& prior,
    const std::vector<int>& controls_prefix) {
    const Categorical predictive = posterior_predictive(spec, prior, controls_prefix);
    const Categorical& goal =
        spec.goal(spec.start_time + static_cast<int>(controls_prefix.size()) - 1);

    const double factored = efe_step_bits(spec, predictive, goal);

    // Direct enumeration over (outcome, state) with the explicit posterior.
    const Categorical py(spec.A.apply(predictive.probs()));
    double direct = 0.0;
    for (std::size_t y = 0; y < spec.num_observations(); ++y) {
        for (std::size_t x = 0; x < spec.num_states(); ++x) {
            const double w = spec.A(y, x) * predictive[x];
            if (w == 0.0) continue;
            const double posterior = spec.A(y, x) * predictive[x] / py[y];
            if (goal[y] == 0.0) return {factored, kInf};
            direct += w * std::log2(predictive[x] / (posterior * goal[y]));
        }
    }
    return {factored, direct};
}

// ---------------------------------------------------------------------------
// Oracles
// ---------------------------------------------------------------------------

double brute_force_evidence(const ModelSpec& spec, const Categorical& prior,
                            const Policy& policy) {
    if (policy.horizon() != spec.horizon) {
        throw ModelError("brute_force_evidence: policy length differs from horizon");
    }
    const std::size_t s = spec.num_states();
    const std::size_t o = spec.num_observations();
    const int T = spec.horizon;
    if (std::pow(static_cast<double>(s), T + 1) *
            std::pow(static_cast<double>(o), T) >
        kEnumerationGuard) {
        throw EnumerationLimitError("joint enumeration exceeds the size guard");
    }

    double z = 0.0;
    std::vector<std::size_t> path(T + 1, 0);
    while (true) {
        double wx = prior[path[0]];
        for (int k = 1; k <= T && wx > 0.0; ++k) {
            wx *= spec.B[policy.controls[k - 1]](path[k], path[k - 1]);
        }
        if (wx > 0.0) {
            std::vector<std::size_t> ys(T, 0);
            while (true) {
                double wy = 1.0;
                for (int k = 0; k < T; ++k) {
                    wy *= spec.A(ys[k], path[k + 1]);
                    wy *= spec.goal(spec.start_time + k)[ys[k]];
                }
                z += wx * wy;
                int i = T - 1;
                for (; i >= 0; --i) {
                    if (++ys[i] < o) break;
                    ys[i] = 0;
                }
                if (i < 0) break;
            }
        }
        int i = T;
        for (; i >= 0; --i) {
            if (++path[i] < s) break;
            path[i] = 0;
        }
        if (i < 0) break;
    }
    return z;
}

std::pair<double, std::vector<std::size_t>> brute_force_cbfe(
    const ModelSpec& spec, const Categorical& prior, const Policy& policy) {
    if (policy.horizon() != spec.horizon) {
        throw ModelError("brute_force_cbfe: policy length differs from horizon");
    }
    const std::size_t o = spec.num_observations();
    const std::size_t s = spec.num_states();
    const int T = spec.horizon;
    if (std::pow(static_cast<double>(o), T) *
            std::pow(static_cast<double>(s), T + 1) >
        kEnumerationGuard) {
        throw EnumerationLimitError("outcome enumeration exceeds the size guard");
    }

    double best = kInf;
    std::vector<std::size_t> best_ys;
    std::vector<std::size_t> ys(T, 0);
    while (true) {
        double goal_mass = 1.0;
        for (int k = 0; k < T; ++k) goal_mass *= spec.goal(spec.start_time + k)[ys[k]];
        if (goal_mass > 0.0) {
            const double log_p = log_outcome_evidence_bits(spec, prior, policy, ys);
            const double value = -log_p - std::log2(goal_mass);
            if (value < best) {
                best = value;
                best_ys = ys;
            }
        }
        int i = T - 1;
        for (; i >= 0; --i) {
            if (++ys[i] < o) break;
            ys[i] = 0;
        }
        if (i < 0) break;
    }
    return {best, best_ys};
}

std::vector<Policy> enumerate_policies(std::size_t num_controls, int horizon) {
    std::vector<Policy> out;
    std::vector<int> controls(horizon, 0);
    while (true) {
        out.push_back(Policy{controls});
        int i = horizon - 1;
        for (; i >= 0; --i) {
            if (++controls[i] < static_cast<int>(num_controls)) break;
            controls[i] = 0;
        }
        if (i < 0) break;
    }
    return out;
}

}  // namespace cbfe
