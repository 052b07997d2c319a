#include "cbfe/graph.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

#include "cbfe/errors.hpp"

namespace cbfe {

namespace {

Message normalized(Message m, const std::string& edge_label) {
    double sum = 0.0;
    for (double v : m) sum += v;
    if (!(sum > 0.0)) throw InconsistencyError(edge_label);
    for (double& v : m) v /= sum;
    return m;
}

Message elementwise_product(const Message& a, const Message& b) {
    Message out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
    return out;
}

std::size_t argmax_lowest(const Message& m) {
    return static_cast<std::size_t>(std::max_element(m.begin(), m.end()) -
                                    m.begin());
}

const StochasticMatrix& matrix_of(const Node& node) {
    if (const auto* dt = std::get_if<DiscreteTransitionNode>(&node.kind)) {
        return dt->matrix;
    }
    const auto& mux = std::get<MultiplexerNode>(node.kind);
    return mux.matrices[mux.selector.index];
}

bool is_transition_like(const Node& node) {
    return std::holds_alternative<DiscreteTransitionNode>(node.kind) ||
           std::holds_alternative<MultiplexerNode>(node.kind);
}

}  // namespace

// ---------------------------------------------------------------------------
// FactorGraph
// ---------------------------------------------------------------------------

int FactorGraph::add_edge(std::size_t domain, std::string label, bool constrained) {
    if (finalized_) throw StateError("FactorGraph: cannot grow a finalized graph");
    if (domain == 0) throw DimensionError("FactorGraph: empty edge domain");
    edges_.push_back(Edge{domain, std::move(label), {-1, -1}, constrained});
    return static_cast<int>(edges_.size()) - 1;
}

int FactorGraph::add_node(NodeKind kind, std::vector<int> edges) {
    if (finalized_) throw StateError("FactorGraph: cannot grow a finalized graph");
    int id = static_cast<int>(nodes_.size());
    for (int e : edges) {
        if (e < 0 || e >= num_edges()) throw DimensionError("FactorGraph: unknown edge");
        Edge& ed = edges_[e];
        if (ed.ends[0] < 0) {
            ed.ends[0] = id;
        } else if (ed.ends[1] < 0) {
            ed.ends[1] = id;
        } else {
            throw ModelError("FactorGraph: edge '" + ed.label +
                             "' already has two endpoints");
        }
    }
    nodes_.push_back(Node{std::move(kind), std::move(edges)});
    return id;
}

int FactorGraph::edge_by_label(const std::string& label) const {
    for (int e = 0; e < num_edges(); ++e) {
        if (edges_[e].label == label) return e;
    }
    throw DimensionError("FactorGraph: no edge labeled '" + label + "'");
}

int FactorGraph::other_end(int e, int n) const {
    const Edge& ed = edges_[e];
    if (ed.ends[0] == n) return ed.ends[1];
    if (ed.ends[1] == n) return ed.ends[0];
    throw DimensionError("FactorGraph: node is not an endpoint of edge '" +
                         ed.label + "'");
}

std::vector<int> FactorGraph::constrained_edges() const {
    std::vector<int> out;
    for (int e = 0; e < num_edges(); ++e) {
        if (edges_[e].constrained) out.push_back(e);
    }
    return out;
}

void FactorGraph::finalize() {
    if (nodes_.empty()) throw ModelError("FactorGraph: no nodes");
    for (const Edge& e : edges_) {
        if (e.ends[0] < 0) {
            throw ModelError("FactorGraph: edge '" + e.label + "' is unattached");
        }
    }
    for (const Node& n : nodes_) {
        std::visit(
            [&](const auto& kind) {
                using T = std::decay_t<decltype(kind)>;
                if constexpr (std::is_same_v<T, CategoricalPriorNode> ||
                              std::is_same_v<T, GoalPriorNode>) {
                    if (n.edges.size() != 1 ||
                        kind.params.size() != edges_[n.edges[0]].domain) {
                        throw ModelError("FactorGraph: prior node arity/domain mismatch");
                    }
                } else if constexpr (std::is_same_v<T, ClampNode>) {
                    if (n.edges.size() != 1 ||
                        kind.value.domain != edges_[n.edges[0]].domain) {
                        throw ModelError("FactorGraph: clamp node arity/domain mismatch");
                    }
                } else if constexpr (std::is_same_v<T, DiscreteTransitionNode>) {
                    if (n.edges.size() != 2 ||
                        kind.matrix.cols() != edges_[n.edges[0]].domain ||
                        kind.matrix.rows() != edges_[n.edges[1]].domain) {
                        throw ModelError("FactorGraph: transition node shape mismatch");
                    }
                } else if constexpr (std::is_same_v<T, MultiplexerNode>) {
                    if (kind.matrices.empty() ||
                        kind.selector.index >= kind.matrices.size()) {
                        throw ModelError("FactorGraph: multiplexer selector out of range");
                    }
                    const auto& m0 = kind.matrices.front();
                    for (const auto& m : kind.matrices) {
                        if (m.rows() != m0.rows() || m.cols() != m0.cols()) {
                            throw ModelError("FactorGraph: multiplexer bank shape mismatch");
                        }
                    }
                    if (n.edges.size() != 2 ||
                        m0.cols() != edges_[n.edges[0]].domain ||
                        m0.rows() != edges_[n.edges[1]].domain) {
                        throw ModelError("FactorGraph: multiplexer node shape mismatch");
                    }
                } else if constexpr (std::is_same_v<T, EqualityNode>) {
                    if (n.edges.size() != 3) {
                        throw ModelError("FactorGraph: equality node must have 3 edges");
                    }
                    std::size_t d = edges_[n.edges[0]].domain;
                    for (int e : n.edges) {
                        if (edges_[e].domain != d) {
                            throw ModelError("FactorGraph: equality edge domains differ");
                        }
                    }
                }
            },
            n.kind);
    }

    // Tree check over full (two-endpoint) edges.
    int full_edges = 0;
    std::vector<std::vector<int>> adj(nodes_.size());
    for (const Edge& e : edges_) {
        if (e.degree() == 2) {
            ++full_edges;
            adj[e.ends[0]].push_back(e.ends[1]);
            adj[e.ends[1]].push_back(e.ends[0]);
        }
    }
    if (full_edges != num_nodes() - 1) {
        throw ModelError("FactorGraph: graph is not a tree");
    }
    std::vector<bool> seen(nodes_.size(), false);
    std::queue<int> frontier;
    frontier.push(0);
    seen[0] = true;
    int reached = 0;
    while (!frontier.empty()) {
        int n = frontier.front();
        frontier.pop();
        ++reached;
        for (int m : adj[n]) {
            if (!seen[m]) {
                seen[m] = true;
                frontier.push(m);
            }
        }
    }
    if (reached != num_nodes()) {
        throw ModelError("FactorGraph: graph is disconnected");
    }
    finalized_ = true;
}

// ---------------------------------------------------------------------------
// Scheduling
// ---------------------------------------------------------------------------

namespace {

bool node_is_variational(const FactorGraph& g, int n) {
    const Node& node = g.node(n);
    if (node.edges.size() < 2) return false;
    for (int e : node.edges) {
        if (g.edge(e).constrained) return true;
    }
    return false;
}

// Availability of the inputs a message (node -> out_edge) consumes, given
// which directed messages are already computed. `computed(e, n)` tells
// whether node n's message over edge e exists.
template <typename ComputedFn>
bool message_ready(const FactorGraph& g, int n, int out_edge, MessageRule rule,
                   const ComputedFn& computed) {
    const Node& node = g.node(n);
    for (int e : node.edges) {
        if (e == out_edge) continue;
        const Edge& ed = g.edge(e);
        if (ed.constrained) continue;  // delta belief from the previous iteration
        if (rule == MessageRule::SumProduct) {
            int other = (ed.ends[0] == n) ? ed.ends[1] : ed.ends[0];
            if (other < 0) continue;  // half edge contributes ones
            if (!computed(e, other)) return false;
        } else {
            // Variational updates consume the full edge belief.
            for (int end : ed.ends) {
                if (end >= 0 && !computed(e, end)) return false;
            }
        }
    }
    return true;
}

}  // namespace

Schedule make_schedule(const FactorGraph& graph) {
    if (!graph.finalized()) throw StateError("make_schedule: graph not finalized");
    Schedule schedule;
    schedule.em_targets = graph.constrained_edges();

    std::vector<std::vector<bool>> done(graph.num_nodes());
    for (int n = 0; n < graph.num_nodes(); ++n) {
        done[n].assign(graph.node(n).edges.size(), false);
    }
    auto computed = [&](int e, int n) {
        const auto& edges = graph.node(n).edges;
        for (std::size_t i = 0; i < edges.size(); ++i) {
            if (edges[i] == e) return static_cast<bool>(done[n][i]);
        }
        return false;
    };

    int remaining = 0;
    for (int n = 0; n < graph.num_nodes(); ++n) {
        remaining += static_cast<int>(graph.node(n).edges.size());
    }
    while (remaining > 0) {
        bool progressed = false;
        for (int n = 0; n < graph.num_nodes(); ++n) {
            MessageRule rule = node_is_variational(graph, n)
                                   ? MessageRule::Variational
                                   : MessageRule::SumProduct;
            const auto& edges = graph.node(n).edges;
            for (std::size_t i = 0; i < edges.size(); ++i) {
                if (done[n][i]) continue;
                if (!message_ready(graph, n, edges[i], rule, computed)) continue;
                schedule.steps.push_back({n, edges[i], rule});
                done[n][i] = true;
                --remaining;
                progressed = true;
            }
        }
        if (!progressed) {
            throw ModelError("make_schedule: no dependency-respecting order exists");
        }
    }
    return schedule;
}

void validate_schedule(const FactorGraph& graph, const Schedule& schedule) {
    std::vector<std::vector<bool>> done(graph.num_nodes());
    for (int n = 0; n < graph.num_nodes(); ++n) {
        done[n].assign(graph.node(n).edges.size(), false);
    }
    auto computed = [&](int e, int n) {
        const auto& edges = graph.node(n).edges;
        for (std::size_t i = 0; i < edges.size(); ++i) {
            if (edges[i] == e) return static_cast<bool>(done[n][i]);
        }
        return false;
    };
    for (const auto& step : schedule.steps) {
        if (!message_ready(graph, step.node, step.edge, step.rule, computed)) {
            throw ModelError("schedule step for edge '" +
                             graph.edge(step.edge).label +
                             "' consumes an unavailable input");
        }
        const auto& edges = graph.node(step.node).edges;
        for (std::size_t i = 0; i < edges.size(); ++i) {
            if (edges[i] == step.edge) done[step.node][i] = true;
        }
    }
}

// ---------------------------------------------------------------------------
// BeliefState
// ---------------------------------------------------------------------------

BeliefState::BeliefState(const FactorGraph& graph)
    : messages_(graph.num_edges()), outcomes_(graph.num_edges()) {
    ends_.reserve(graph.num_edges());
    labels_.reserve(graph.num_edges());
    for (int e = 0; e < graph.num_edges(); ++e) {
        ends_.push_back(graph.edge(e).ends);
        labels_.push_back(graph.edge(e).label);
    }
}

int BeliefState::slot_of(int e, int n) const {
    if (ends_[e][0] == n) return 0;
    if (ends_[e][1] == n) return 1;
    throw DimensionError("BeliefState: node is not an endpoint of edge '" +
                         labels_[e] + "'");
}

const Message& BeliefState::message_from(int e, int n) const {
    const Message& m = messages_[e][slot_of(e, n)];
    if (m.empty()) {
        throw StateError("BeliefState: message on edge '" + labels_[e] +
                         "' not computed yet");
    }
    return m;
}

void BeliefState::set_message(int e, int n, Message m) {
    messages_[e][slot_of(e, n)] = std::move(m);
}

bool BeliefState::has_message(int e, int n) const {
    return !messages_[e][slot_of(e, n)].empty();
}

Message BeliefState::incoming(const FactorGraph& graph, int e, int n) const {
    const Edge& ed = graph.edge(e);
    if (ed.constrained) {
        if (!outcomes_[e]) {
            throw StateError("BeliefState: constrained edge '" + ed.label +
                             "' has no point mass");
        }
        Message m(ed.domain, 0.0);
        m[*outcomes_[e]] = 1.0;
        return m;
    }
    int other = (ed.ends[0] == n) ? ed.ends[1] : ed.ends[0];
    if (other < 0) return Message(ed.domain, 1.0);  // half edge
    return message_from(e, other);
}

Message BeliefState::edge_belief(const FactorGraph& graph, int e) const {
    const Edge& ed = graph.edge(e);
    if (ed.constrained) {
        if (!outcomes_[e]) {
            throw StateError("BeliefState: constrained edge '" + ed.label +
                             "' has no point mass");
        }
        Message m(ed.domain, 0.0);
        m[*outcomes_[e]] = 1.0;
        return m;
    }
    Message prod = message_from(e, ed.ends[0]);
    if (ed.ends[1] >= 0) {
        prod = elementwise_product(prod, message_from(e, ed.ends[1]));
    }
    return normalized(std::move(prod), ed.label);
}

// ---------------------------------------------------------------------------
// Message computation
// ---------------------------------------------------------------------------

Message compute_message(const FactorGraph& graph, const BeliefState& beliefs,
                        int node_id, int out_edge, MessageRule rule) {
    const Node& node = graph.node(node_id);
    const std::string& label = graph.edge(out_edge).label;

    if (const auto* prior = std::get_if<CategoricalPriorNode>(&node.kind)) {
        return prior->params.probs();
    }
    if (const auto* goal = std::get_if<GoalPriorNode>(&node.kind)) {
        return goal->params.probs();
    }
    if (const auto* clamp = std::get_if<ClampNode>(&node.kind)) {
        Message m(clamp->value.domain, 0.0);
        m[clamp->value.index] = 1.0;
        return m;
    }
    if (std::holds_alternative<EqualityNode>(node.kind)) {
        Message prod;
        for (int e : node.edges) {
            if (e == out_edge) continue;
            Message in = beliefs.incoming(graph, e, node_id);
            prod = prod.empty() ? std::move(in) : elementwise_product(prod, in);
        }
        return normalized(std::move(prod), label);
    }

    // Transition-like nodes: edges are {input, output}.
    const StochasticMatrix& m = matrix_of(node);
    const int in_edge = node.edges[0];
    const int out_edge_id = node.edges[1];
    const bool toward_output = (out_edge == out_edge_id);
    if (!toward_output && out_edge != in_edge) {
        throw DimensionError("compute_message: edge not incident to node");
    }

    if (rule == MessageRule::SumProduct) {
        if (toward_output) {
            return normalized(m.apply(beliefs.incoming(graph, in_edge, node_id)),
                              label);
        }
        return normalized(
            m.apply_transposed(beliefs.incoming(graph, out_edge_id, node_id)),
            label);
    }

    // Variational update from the belief over the opposite edge. A point-mass
    // belief selects the exact matrix row or column.
    if (toward_output) {
        const Edge& in = graph.edge(in_edge);
        if (in.constrained) {
            return normalized(m.column(*beliefs.outcome(in_edge)), label);
        }
        Message q = beliefs.edge_belief(graph, in_edge);
        if (auto hot = std::find(q.begin(), q.end(), 1.0); hot != q.end()) {
            return normalized(m.column(static_cast<std::size_t>(hot - q.begin())),
                              label);
        }
        Message out(m.rows());
        for (std::size_t r = 0; r < m.rows(); ++r) {
            double log_sum = 0.0;
            bool zero = false;
            for (std::size_t c = 0; c < m.cols(); ++c) {
                if (q[c] == 0.0) continue;
                if (m(r, c) == 0.0) {
                    zero = true;
                    break;
                }
                log_sum += q[c] * std::log(m(r, c));
            }
            out[r] = zero ? 0.0 : std::exp(log_sum);
        }
        return normalized(std::move(out), label);
    }

    const Edge& out_ed = graph.edge(out_edge_id);
    if (out_ed.constrained) {
        return normalized(m.row(*beliefs.outcome(out_edge_id)), label);
    }
    Message q = beliefs.edge_belief(graph, out_edge_id);
    if (auto hot = std::find(q.begin(), q.end(), 1.0); hot != q.end()) {
        return normalized(m.row(static_cast<std::size_t>(hot - q.begin())), label);
    }
    Message out(m.cols());
    for (std::size_t c = 0; c < m.cols(); ++c) {
        double log_sum = 0.0;
        bool zero = false;
        for (std::size_t r = 0; r < m.rows(); ++r) {
            if (q[r] == 0.0) continue;
            if (m(r, c) == 0.0) {
                zero = true;
                break;
            }
            log_sum += q[r] * std::log(m(r, c));
        }
        out[c] = zero ? 0.0 : std::exp(log_sum);
    }
    return normalized(std::move(out), label);
}

// ---------------------------------------------------------------------------
// Schedule execution
// ---------------------------------------------------------------------------

ScheduleResult run_schedule(const FactorGraph& graph, const Schedule& schedule,
                            int max_iters,
                            const std::vector<std::size_t>& initial_outcomes) {
    if (!graph.finalized()) throw StateError("run_schedule: graph not finalized");
    if (initial_outcomes.size() != schedule.em_targets.size()) {
        throw DimensionError("run_schedule: initial outcomes do not match EM targets");
    }

    BeliefState state(graph);
    for (std::size_t i = 0; i < schedule.em_targets.size(); ++i) {
        int e = schedule.em_targets[i];
        if (initial_outcomes[i] >= graph.edge(e).domain) {
            throw DimensionError("run_schedule: initial outcome out of range");
        }
        state.set_outcome(e, initial_outcomes[i]);
    }

    ScheduleResult result;
    for (int sweep = 1; sweep <= max_iters; ++sweep) {
        for (const auto& step : schedule.steps) {
            state.set_message(step.edge, step.node,
                              compute_message(graph, state, step.node, step.edge,
                                              step.rule));
        }
        state.mark_executed();
        result.sweeps = sweep;
        result.sweep_history.push_back(state);

        // Point-mass update: mode of the product of the incident messages.
        bool changed = false;
        for (int e : schedule.em_targets) {
            const Edge& ed = graph.edge(e);
            Message prod = state.message_from(e, ed.ends[0]);
            if (ed.ends[1] >= 0) {
                prod = elementwise_product(prod, state.message_from(e, ed.ends[1]));
            }
            double total = 0.0;
            for (double v : prod) total += v;
            if (!(total > 0.0)) throw InconsistencyError(ed.label);
            std::size_t mode = argmax_lowest(prod);
            if (mode != *state.outcome(e)) {
                state.set_outcome(e, mode);
                changed = true;
            }
        }
        if (!changed) {
            result.converged = true;
            break;
        }
    }
    result.beliefs = result.sweep_history.back();
    return result;
}

Categorical marginal(const FactorGraph& graph, const BeliefState& beliefs, int e) {
    if (!beliefs.executed()) {
        throw StateError("marginal: schedule has not run yet");
    }
    return Categorical(beliefs.edge_belief(graph, e));
}

std::vector<double> node_joint(const FactorGraph& graph, const BeliefState& beliefs,
                               int n) {
    const Node& node = graph.node(n);
    if (!is_transition_like(node)) {
        throw StateError("node_joint: node has no pairwise factor table");
    }
    const StochasticMatrix& m = matrix_of(node);
    Message in = beliefs.incoming(graph, node.edges[0], n);
    Message out = beliefs.incoming(graph, node.edges[1], n);
    std::vector<double> joint(m.rows() * m.cols());
    double sum = 0.0;
    for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t c = 0; c < m.cols(); ++c) {
            double v = m(r, c) * in[c] * out[r];
            joint[r * m.cols() + c] = v;
            sum += v;
        }
    }
    if (!(sum > 0.0)) throw InconsistencyError(graph.edge(node.edges[1]).label);
    for (double& v : joint) v /= sum;
    return joint;
}

// ---------------------------------------------------------------------------
// Builders
// ---------------------------------------------------------------------------

FutureModel build_future_model(const ModelSpec& spec, const Categorical& prior,
                               const Policy& policy, bool constrain_observations) {
    spec.validate();
    if (policy.horizon() != spec.horizon) {
        throw ModelError("build_future_model: policy length differs from horizon");
    }
    if (prior.size() != spec.num_states()) {
        throw ModelError("build_future_model: prior length differs from state space");
    }
    for (int u : policy.controls) {
        if (u < 0 || static_cast<std::size_t>(u) >= spec.num_controls()) {
            throw ModelError("build_future_model: control index out of range");
        }
    }

    const std::size_t S = spec.num_states();
    const std::size_t O = spec.num_observations();
    const int T = spec.horizon;

    FutureModel fm;
    FactorGraph& g = fm.graph;

    int chain_edge = g.add_edge(S, "x" + std::to_string(spec.start_time - 1));
    fm.layout.prior_edge = chain_edge;
    g.add_node(CategoricalPriorNode{prior}, {chain_edge});

    for (int k = 1; k <= T; ++k) {
        const int t = spec.start_time + k - 1;
        const std::string xt = "x" + std::to_string(t);
        const int x_in = g.add_edge(S, xt);
        const int mux = g.add_node(
            MultiplexerNode{spec.B, PointMass(static_cast<std::size_t>(
                                                  policy.controls[k - 1]),
                                              spec.num_controls())},
            {chain_edge, x_in});
        fm.layout.transition_nodes.push_back(mux);

        int x_obs = x_in;
        if (k < T) {
            x_obs = g.add_edge(S, xt + ":obs");
            const int x_next = g.add_edge(S, xt + ":next");
            g.add_node(EqualityNode{}, {x_in, x_obs, x_next});
            chain_edge = x_next;
        }
        const int y = g.add_edge(O, "y" + std::to_string(t), constrain_observations);
        const int obs = g.add_node(DiscreteTransitionNode{spec.A}, {x_obs, y});
        g.add_node(GoalPriorNode{spec.goal(t)}, {y});
        fm.layout.observation_nodes.push_back(obs);
        fm.layout.goal_nodes.push_back(g.num_nodes() - 1);
        fm.layout.y_edges.push_back(y);
        fm.layout.x_obs_edges.push_back(x_obs);
    }

    g.finalize();
    return fm;
}

BanditGraph build_bandit_graph(const BanditModel& model, int control,
                               bool constrain_observations) {
    if (control < 0 || static_cast<std::size_t>(control) >= model.num_controls()) {
        throw ModelError("build_bandit_graph: control index out of range");
    }
    BanditGraph bg;
    const int u = bg.graph.add_edge(model.num_controls(), "u");
    bg.y_edge = bg.graph.add_edge(model.num_outcomes(), "y", constrain_observations);
    bg.graph.add_node(
        ClampNode{PointMass(static_cast<std::size_t>(control), model.num_controls())},
        {u});
    bg.node = bg.graph.add_node(DiscreteTransitionNode{model.matrix}, {u, bg.y_edge});
    bg.graph.finalize();
    return bg;
}

}  // namespace cbfe
