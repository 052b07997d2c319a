#pragma once

#include <stdexcept>
#include <string>

namespace cbfe {

// Length or shape mismatch between vectors, matrices or graph edges.
struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Structurally invalid generative model (incompatible parameter shapes,
// bad arities, cyclic graphs).
struct ModelError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Contradictory evidence: a message or belief product collapsed to the
// all-zero vector. Carries the label of the edge where it happened.
struct InconsistencyError : std::runtime_error {
    explicit InconsistencyError(const std::string& edge_label)
        : std::runtime_error("inconsistent beliefs on edge '" + edge_label +
                             "': all-zero product"),
          edge(edge_label) {}

    std::string edge;
};

// Operation requires state that does not exist yet (e.g. marginals queried
// before a schedule has run).
struct StateError : std::logic_error {
    using std::logic_error::logic_error;
};

// A brute-force enumeration would exceed the configured size guard.
struct EnumerationLimitError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace cbfe
