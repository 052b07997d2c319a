#pragma once

#include <array>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "cbfe/dist.hpp"
#include "cbfe/model.hpp"

namespace cbfe {

// ---------------------------------------------------------------------------
// Forney-style factor graph: edges are variables, nodes are factors. Every
// edge has one or two node endpoints; a missing second endpoint is a half
// edge. Point-mass constrained edges hold a delta belief whose location is
// optimized by expectation maximization during schedule execution.
// ---------------------------------------------------------------------------

struct CategoricalPriorNode {
    Categorical params;
};

struct GoalPriorNode {
    Categorical params;
};

// Conditional probability table between an input edge (columns) and an
// output edge (rows).
struct DiscreteTransitionNode {
    StochasticMatrix matrix;
};

// Transition whose matrix is selected from a bank by a clamped control.
struct MultiplexerNode {
    std::vector<StochasticMatrix> matrices;
    PointMass selector;
};

struct EqualityNode {};

// A given value (observed outcome or fixed control).
struct ClampNode {
    PointMass value;
};

using NodeKind = std::variant<CategoricalPriorNode, GoalPriorNode,
                              DiscreteTransitionNode, MultiplexerNode,
                              EqualityNode, ClampNode>;

enum class MessageRule { SumProduct, Variational };

// Unnormalized potential over an edge domain. Valid messages have at least
// one strictly positive entry; normalization enforces this.
using Message = std::vector<double>;

struct Edge {
    std::size_t domain = 0;
    std::string label;
    std::array<int, 2> ends{-1, -1};  // node ids; ends[1] < 0 for a half edge
    bool constrained = false;         // carries a point-mass constraint

    int degree() const { return (ends[0] >= 0 ? 1 : 0) + (ends[1] >= 0 ? 1 : 0); }
};

struct Node {
    NodeKind kind;
    // Incident edge ids. For DiscreteTransition/Multiplexer the order is
    // {input, output}; Equality has three interchangeable entries.
    std::vector<int> edges;
};

class FactorGraph {
  public:
    int add_edge(std::size_t domain, std::string label, bool constrained = false);
    int add_node(NodeKind kind, std::vector<int> edges);

    // Arity, dimension, and acyclicity checks; must be called once after
    // construction. Only tree graphs are accepted.
    void finalize();
    bool finalized() const { return finalized_; }

    const Edge& edge(int e) const { return edges_[e]; }
    const Node& node(int n) const { return nodes_[n]; }
    int num_edges() const { return static_cast<int>(edges_.size()); }
    int num_nodes() const { return static_cast<int>(nodes_.size()); }

    int edge_by_label(const std::string& label) const;  // first match
    int other_end(int e, int n) const;

    std::vector<int> constrained_edges() const;

  private:
    std::vector<Edge> edges_;
    std::vector<Node> nodes_;
    bool finalized_ = false;
};

// One message computation: node emits over edge using the given rule.
struct ScheduledMessage {
    int node = -1;
    int edge = -1;
    MessageRule rule = MessageRule::SumProduct;

    bool operator==(const ScheduledMessage&) const = default;
};

struct Schedule {
    std::vector<ScheduledMessage> steps;
    std::vector<int> em_targets;  // point-mass constrained edges, id order
};

// Builds a dependency-respecting schedule covering every directed message of
// the graph once per sweep. Messages emitted by a node with a point-mass
// constrained incident edge are variational; all others are sum-product.
Schedule make_schedule(const FactorGraph& graph);

// Throws if some step consumes an input that no earlier step provides.
void validate_schedule(const FactorGraph& graph, const Schedule& schedule);

// ---------------------------------------------------------------------------
// Beliefs
// ---------------------------------------------------------------------------

class BeliefState {
  public:
    BeliefState() = default;
    explicit BeliefState(const FactorGraph& graph);

    bool executed() const { return executed_; }
    void mark_executed() { executed_ = true; }

    // Directed message emitted by node `n` over edge `e`.
    const Message& message_from(int e, int n) const;
    void set_message(int e, int n, Message m);
    bool has_message(int e, int n) const;

    // Message arriving at node `n` over edge `e`: the opposing endpoint's
    // message, a one-hot vector on constrained edges, or ones on half edges.
    Message incoming(const FactorGraph& graph, int e, int n) const;

    // Belief on an edge as seen from node `n`: one-hot for constrained
    // edges, otherwise the normalized product of both directed messages.
    Message edge_belief(const FactorGraph& graph, int e) const;

    std::optional<std::size_t> outcome(int e) const { return outcomes_[e]; }
    void set_outcome(int e, std::size_t index) { outcomes_[e] = index; }

  private:
    // slot 0: emitted by ends[0]; slot 1: emitted by ends[1].
    std::vector<std::array<Message, 2>> messages_;
    std::vector<std::optional<std::size_t>> outcomes_;
    std::vector<std::array<int, 2>> ends_;  // edge endpoints, copied from the graph
    std::vector<std::string> labels_;
    bool executed_ = false;

    int slot_of(int e, int n) const;
};

// Computes one message per the fixed rule table. Output is normalized to sum
// one; an all-zero result raises InconsistencyError naming the edge.
Message compute_message(const FactorGraph& graph, const BeliefState& beliefs,
                        int node, int out_edge, MessageRule rule);

struct ScheduleResult {
    BeliefState beliefs;  // state after the final sweep
    bool converged = false;
    int sweeps = 0;
    // Snapshot taken after each sweep's message pass, before the point-mass
    // update; its outcomes are the values the sweep was computed with.
    std::vector<BeliefState> sweep_history;
};

inline constexpr int kDefaultMaxSweeps = 50;

// Executes sweeps of the schedule. After each sweep every constrained edge
// moves its point mass to the argmax of the product of its incident
// messages (lowest index wins ties); iteration stops when no point mass
// changes or max_iters is reached. `initial_outcomes` pairs up with
// schedule.em_targets.
ScheduleResult run_schedule(const FactorGraph& graph, const Schedule& schedule,
                            int max_iters,
                            const std::vector<std::size_t>& initial_outcomes = {});

// Normalized product of the two directed messages on an edge (one-hot for
// constrained edges). Requires an executed belief state.
Categorical marginal(const FactorGraph& graph, const BeliefState& beliefs, int e);

// Joint belief of a factor node over (output, input), reconstructed from the
// factor table and its incoming messages. Row-major over the output domain.
std::vector<double> node_joint(const FactorGraph& graph, const BeliefState& beliefs,
                               int n);

// ---------------------------------------------------------------------------
// Model builders
// ---------------------------------------------------------------------------

// Edge and node ids of interest in a future-model chain graph.
struct FutureModelLayout {
    std::vector<int> transition_nodes;   // one per step
    std::vector<int> observation_nodes;  // one per step
    std::vector<int> goal_nodes;         // one per step
    std::vector<int> y_edges;            // one per step
    std::vector<int> x_obs_edges;        // state edge entering each observation node
    int prior_edge = -1;
};

struct FutureModel {
    FactorGraph graph;
    FutureModelLayout layout;
};

// Unrolls the planning window of `spec` under a fixed policy into a chain:
// prior -> per-step multiplexed transition -> (equality ->) observation ->
// goal prior. Observation edges carry point-mass constraints iff
// `constrain_observations` is set.
FutureModel build_future_model(const ModelSpec& spec, const Categorical& prior,
                               const Policy& policy, bool constrain_observations);

struct BanditGraph {
    FactorGraph graph;
    int y_edge = -1;
    int node = -1;
};

// Clamped control feeding a single observation factor with a dangling
// outcome edge.
BanditGraph build_bandit_graph(const BanditModel& model, int control,
                               bool constrain_observations);

}  // namespace cbfe
