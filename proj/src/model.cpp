#include "cbfe/model.hpp"

#include <string>

#include "cbfe/errors.hpp"

namespace cbfe {

const Categorical& ModelSpec::goal(int k) const {
    auto it = goals.find(k);
    if (it == goals.end()) {
        throw ModelError("ModelSpec: no goal prior defined for time " +
                         std::to_string(k));
    }
    return it->second;
}

void ModelSpec::validate() const {
    if (B.empty()) throw ModelError("ModelSpec: no transition matrices");
    std::size_t s = num_states();
    for (const auto& b : B) {
        if (b.rows() != s || b.cols() != s) {
            throw ModelError("ModelSpec: transition matrix shape mismatch");
        }
    }
    if (d0.size() != s) throw ModelError("ModelSpec: prior length mismatch");
    if (horizon < 1) throw ModelError("ModelSpec: horizon must be positive");
    for (int k = start_time; k < start_time + horizon; ++k) {
        if (goal(k).size() != num_observations()) {
            throw ModelError("ModelSpec: goal prior length mismatch");
        }
    }
}

}  // namespace cbfe
