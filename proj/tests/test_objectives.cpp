#include <doctest.h>

#include <cmath>
#include <limits>

#include "cbfe/objectives.hpp"
#include "cbfe/tmaze.hpp"
#include "enumeration.hpp"

using namespace cbfe;
using tmaze::codec::observation_index;
using tmaze::codec::state_index;

namespace {

const Categorical kPrior = tmaze::initial_state_prior();

ModelSpec maze(double alpha, double c) { return tmaze::build_tmaze_model(alpha, c, 2); }

std::vector<double> grid_values(const ModelSpec& spec, Objective objective,
                                RestartMode restart = RestartMode::Exhaustive) {
    std::vector<double> values;
    for (const Policy& policy : enumerate_policies(spec.num_controls(), spec.horizon)) {
        switch (objective) {
            case Objective::Bfe:
                values.push_back(optimize_bfe(spec, kPrior, policy).value);
                break;
            case Objective::Cbfe:
                values.push_back(optimize_cbfe(spec, kPrior, policy, restart).value);
                break;
            case Objective::Efe:
                values.push_back(efe(spec, kPrior, policy));
                break;
        }
    }
    return values;
}

}  // namespace

TEST_CASE("bandit free energies") {
    const BanditModel bandit = tmaze::build_bandit_model();

    CHECK(solve_bandit_bfe(bandit, 0).report.value == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(solve_bandit_bfe(bandit, 1).report.value == doctest::Approx(0.0).epsilon(1e-12));

    CbfeSolution informative = solve_bandit_cbfe(bandit, 1, RestartMode::Exhaustive);
    CHECK(informative.report.value == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(informative.report.optimal_outcomes.value() == std::vector<std::size_t>{0});
    CHECK(informative.report.converged);

    CbfeSolution ignorant = solve_bandit_cbfe(bandit, 0, RestartMode::Exhaustive);
    CHECK(ignorant.report.value == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(ignorant.report.converged);

    // Mode init agrees on this model.
    CHECK(solve_bandit_cbfe(bandit, 0, RestartMode::ModeInit).report.value ==
          doctest::Approx(1.0));
}

TEST_CASE("unconstrained optimum equals the negative log evidence on trees") {
    for (double alpha : {0.5, 0.9, 1.0}) {
        for (double c : {0.0, 2.0}) {
            const ModelSpec spec = maze(alpha, c);
            for (const Policy& policy :
                 {Policy{{0, 0}}, Policy{{3, 2}}, Policy{{2, 1}}, Policy{{1, 3}}}) {
                const double value = optimize_bfe(spec, kPrior, policy).value;
                const double z = enumeration::evidence(spec, kPrior, policy);
                CHECK(value == doctest::Approx(-std::log2(z)).epsilon(1e-11));
            }
        }
    }
}

TEST_CASE("flat goals erase policy preferences of the unconstrained objective") {
    auto values = grid_values(maze(0.9, 0.0), Objective::Bfe);
    for (double v : values) CHECK(v == doctest::Approx(8.0).epsilon(1e-11));
}

TEST_CASE("unconstrained grid ignores the reward probability") {
    auto low = grid_values(maze(0.5, 2.0), Objective::Bfe);
    auto high = grid_values(maze(0.9, 2.0), Objective::Bfe);
    for (std::size_t i = 0; i < low.size(); ++i) {
        CHECK(low[i] == doctest::Approx(high[i]).epsilon(1e-11));
    }
}

TEST_CASE("constrained optimum prefers the informative policies") {
    const ModelSpec spec = maze(0.9, 2.0);
    auto values = grid_values(spec, Objective::Cbfe);
    double best = *std::min_element(values.begin(), values.end());
    std::vector<int> argmin;
    for (int i = 0; i < 16; ++i) {
        if (values[i] <= best + 1e-9) argmin.push_back(i);
    }
    // Policies (4,2) and (4,3): row-major with the first move major.
    CHECK(argmin == std::vector<int>{3 * 4 + 1, 3 * 4 + 2});
    CHECK(values[13] == doctest::Approx(values[14]).epsilon(1e-12));
}

TEST_CASE("constrained optimum matches the enumeration oracle") {
    const ModelSpec spec = maze(0.9, 2.0);
    for (const Policy& policy : {Policy{{3, 2}}, Policy{{0, 1}}, Policy{{2, 2}}}) {
        const auto [oracle, ys] = brute_force_cbfe(spec, kPrior, policy);
        const FreeEnergyReport report =
            optimize_cbfe(spec, kPrior, policy, RestartMode::Exhaustive);
        CHECK(report.value == doctest::Approx(oracle).epsilon(1e-11));
        CHECK(report.converged);
        CHECK(report.sweeps < 10);
    }

    // The informative policy commits to the cue outcome that points at the
    // arm it then visits.
    CbfeSolution sol = solve_cbfe(spec, kPrior, Policy{{3, 2}}, RestartMode::Exhaustive);
    const auto& ys = sol.report.optimal_outcomes.value();
    CHECK(ys[0] == static_cast<std::size_t>(observation_index(4, tmaze::kOutcomeCueRight)));
    CHECK(ys[1] == static_cast<std::size_t>(observation_index(3, tmaze::kOutcomeReward)));
}

TEST_CASE("expectation maximization is monotone across sweeps") {
    // Flat goals leave the cue outcomes tied, so the seeded mode starts the
    // EM away from its fixed point and the trajectory has real steps.
    const ModelSpec spec = maze(0.9, 0.0);
    CbfeSolution sol = solve_cbfe(spec, kPrior, Policy{{3, 2}}, RestartMode::ModeInit);
    REQUIRE(sol.sweep_history.size() >= 2);
    double prev = std::numeric_limits<double>::infinity();
    for (const BeliefState& snapshot : sol.sweep_history) {
        double value = bethe_free_energy(sol.graph, snapshot);
        CHECK(value <= prev + 1e-9);
        prev = value;
    }
}

TEST_CASE("epistemic value bound is tight along the EM trajectory") {
    const ModelSpec spec = maze(0.9, 2.0);
    for (const Policy& policy : {Policy{{3, 2}}, Policy{{1, 1}}, Policy{{0, 3}}}) {
        CbfeSolution sol = solve_cbfe(spec, kPrior, policy, RestartMode::ModeInit);
        REQUIRE(!sol.sweep_history.empty());
        for (std::size_t s = 0; s < sol.sweep_history.size(); ++s) {
            const BeliefState& snapshot = sol.sweep_history[s];
            std::vector<std::size_t> ys;
            for (int e : sol.layout.y_edges) ys.push_back(*snapshot.outcome(e));
            CbfeDecomposition d =
                cbfe_decompose(spec, kPrior, policy, sol.graph, sol.layout, snapshot, ys);
            const double gap =
                d.epistemic_value_of_policy - (d.opportunity - d.risk);
            CHECK(gap <= 1e-9);
            if (s + 1 == sol.sweep_history.size()) {
                CHECK(std::abs(gap) <= 1e-9);
            }
        }
    }
}

TEST_CASE("constrained decomposition terms and identities") {
    const ModelSpec spec = maze(0.9, 2.0);

    // Staying put rejects one bit of information per step.
    CbfeSolution stay = solve_cbfe(spec, kPrior, Policy{{0, 0}}, RestartMode::Exhaustive);
    CbfeDecomposition d_stay = cbfe_decompose(spec, kPrior, Policy{{0, 0}}, stay);
    CHECK(d_stay.opportunity == doctest::Approx(-2.0).epsilon(1e-11));
    // Uninformative outcomes leave the state belief at the predictive.
    CHECK(d_stay.risk == doctest::Approx(0.0).epsilon(1e-11));

    for (const Policy& policy : {Policy{{3, 3}}, Policy{{3, 2}}, Policy{{1, 0}}}) {
        CbfeSolution sol = solve_cbfe(spec, kPrior, policy, RestartMode::Exhaustive);
        CbfeDecomposition d = cbfe_decompose(spec, kPrior, policy, sol);
        const double value = sol.report.value;

        CHECK(-d.opportunity + d.risk - d.extrinsic_value ==
              doctest::Approx(value).epsilon(1e-11));
        CHECK(d.posterior_divergence - d.epistemic_value_of_policy -
                  d.extrinsic_value ==
              doctest::Approx(value).epsilon(1e-11));
        CHECK(d.posterior_divergence >= -1e-9);
        CHECK(d.risk >= -1e-9);

        // All terms against exhaustive-sum references.
        const auto& ys = sol.report.optimal_outcomes.value();
        const double p = enumeration::outcome_probability(spec, kPrior, policy, ys);
        CHECK(d.epistemic_value_of_policy ==
              doctest::Approx(std::log2(p)).epsilon(1e-11));

        double extrinsic = 0.0;
        for (int k = 0; k < 2; ++k) {
            extrinsic += std::log2(spec.goal(k + 1)[ys[k]]);
        }
        CHECK(d.extrinsic_value == doctest::Approx(extrinsic).epsilon(1e-11));

        double opportunity = 0.0;
        for (int k = 1; k <= 2; ++k) {
            auto q = enumeration::state_posterior(spec, kPrior, policy, ys, k);
            for (int s = 0; s < 8; ++s) {
                if (q[s] > 0) opportunity += q[s] * std::log2(spec.A(ys[k - 1], s));
            }
        }
        CHECK(d.opportunity == doctest::Approx(opportunity).epsilon(1e-11));

        // Risk against the exact chain divergence: sum over pairwise terms.
        double risk = 0.0;
        for (int k = 1; k <= 2; ++k) {
            auto pair = enumeration::pairwise_posterior(spec, kPrior, policy, ys, k);
            auto margin = enumeration::state_posterior(spec, kPrior, policy, ys, k - 1);
            const auto& b = spec.B[policy.controls[k - 1]];
            for (int to = 0; to < 8; ++to) {
                for (int from = 0; from < 8; ++from) {
                    double q = pair[to * 8 + from];
                    if (q > 0) {
                        risk += q * std::log2(q / (margin[from] * b(to, from)));
                    }
                }
            }
            if (k == 1) {
                for (int s = 0; s < 8; ++s) {
                    if (margin[s] > 0) risk += margin[s] * std::log2(margin[s] / kPrior[s]);
                }
            }
        }
        CHECK(d.risk == doctest::Approx(risk).epsilon(1e-10));
    }
}

TEST_CASE("unconstrained decomposition") {
    // Flat goals: expected extrinsic value is -4 bits per step and the belief
    // over outcomes matches the observation model exactly.
    const ModelSpec flat = maze(0.9, 0.0);
    BfeSolution sol_flat = solve_bfe(flat, kPrior, Policy{{3, 2}});
    BfeDecomposition d_flat = bfe_decompose(flat, kPrior, Policy{{3, 2}}, sol_flat);
    CHECK(d_flat.expected_extrinsic_value == doctest::Approx(-8.0).epsilon(1e-11));
    CHECK(d_flat.expected_divergence == doctest::Approx(0.0).epsilon(1e-11));

    const ModelSpec spec = maze(0.9, 2.0);
    for (const Policy& policy : {Policy{{3, 2}}, Policy{{0, 0}}, Policy{{2, 3}}}) {
        BfeSolution sol = solve_bfe(spec, kPrior, policy);
        BfeDecomposition d = bfe_decompose(spec, kPrior, policy, sol);
        CHECK(d.expected_divergence + d.risk - d.expected_extrinsic_value ==
              doctest::Approx(sol.report.value).epsilon(1e-11));
        CHECK(d.expected_divergence >= -1e-9);
    }
}

TEST_CASE("posterior predictive follows the transition chain") {
    const ModelSpec spec = maze(0.9, 2.0);

    Categorical cue = posterior_predictive(spec, kPrior, {3});
    CHECK(cue[state_index(4, 2)] == doctest::Approx(0.5));
    CHECK(cue[state_index(4, 3)] == doctest::Approx(0.5));

    // The arms attract: a later move cannot leave.
    Categorical stuck = posterior_predictive(spec, kPrior, {1, 2});
    CHECK(stuck[state_index(2, 2)] == doctest::Approx(0.5));
    CHECK(stuck[state_index(2, 3)] == doctest::Approx(0.5));

    // Staying at the start reproduces the prior.
    Categorical same = posterior_predictive(spec, kPrior, {0});
    for (int s = 0; s < 8; ++s) CHECK(same[s] == doctest::Approx(kPrior[s]));

    CHECK_THROWS_AS(posterior_predictive(spec, kPrior, {}), DimensionError);
}

TEST_CASE("expected free energy prefers the cue in every scenario") {
    for (auto [alpha, c] : {std::pair{0.9, 2.0}, {0.5, 2.0}, {0.9, 0.0}}) {
        auto values = grid_values(maze(alpha, c), Objective::Efe);
        int argmin = static_cast<int>(
            std::min_element(values.begin(), values.end()) - values.begin());
        CHECK(argmin == 15);  // policy (4,4)
    }
}

TEST_CASE("instantaneous expected free energy vanishes for a matched model") {
    // Deterministic observations and a goal equal to the predicted outcome
    // distribution: no ambiguity, no risk.
    ModelSpec spec = maze(1.0, 2.0);
    const Categorical prior = Categorical::one_hot(state_index(4, 3), 8);
    const Categorical predicted(spec.A.apply(spec.B[3].apply(prior.probs())));
    spec.goals.insert_or_assign(spec.start_time, predicted);
    auto [factored, direct] = efe_instantaneous_check(spec, prior, {3});
    CHECK(factored == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(direct == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("two routes to the instantaneous expected free energy agree") {
    for (auto [alpha, c] : {std::pair{0.9, 2.0}, {0.5, 2.0}, {1.0, 2.0}, {0.9, 0.0}}) {
        const ModelSpec spec = maze(alpha, c);
        for (const Policy& policy : enumerate_policies(4, 2)) {
            std::vector<int> prefix;
            double total = 0.0;
            for (int u : policy.controls) {
                prefix.push_back(u);
                auto [factored, direct] = efe_instantaneous_check(spec, kPrior, prefix);
                CHECK(factored == doctest::Approx(direct).epsilon(1e-11));
                total += factored;
            }
            CHECK(total == doctest::Approx(efe(spec, kPrior, policy)).epsilon(1e-11));
        }
    }
}

TEST_CASE("first-step risk against a flat goal is a plain divergence") {
    const ModelSpec spec = maze(0.9, 2.0);
    auto [factored, direct] = efe_instantaneous_check(spec, kPrior, {3});
    // Move to the cue: ambiguity is zero, so only the risk term remains.
    const Categorical py(spec.A.apply(posterior_predictive(spec, kPrior, {3}).probs()));
    CHECK(factored ==
          doctest::Approx(kl_divergence(py, Categorical::uniform(16))).epsilon(1e-12));
}

TEST_CASE("evidence oracle basics") {
    // Flat goals factor out of the evidence completely.
    const ModelSpec flat = maze(0.9, 0.0);
    for (const Policy& policy : {Policy{{0, 0}}, Policy{{3, 2}}}) {
        CHECK(brute_force_evidence(flat, kPrior, policy) ==
              doctest::Approx(1.0 / 256).epsilon(1e-12));
    }

    // Against the independent reference sum.
    const ModelSpec spec = maze(0.9, 2.0);
    for (const Policy& policy : {Policy{{3, 2}}, Policy{{1, 1}}}) {
        CHECK(brute_force_evidence(spec, kPrior, policy) ==
              doctest::Approx(enumeration::evidence(spec, kPrior, policy))
                  .epsilon(1e-12));
    }
}

TEST_CASE("constrained oracle ties between equally informative arms") {
    const ModelSpec spec = maze(0.9, 2.0);
    const auto [left, ys_left] = brute_force_cbfe(spec, kPrior, Policy{{3, 1}});
    const auto [right, ys_right] = brute_force_cbfe(spec, kPrior, Policy{{3, 2}});
    CHECK(left == doctest::Approx(right).epsilon(1e-11));
}

TEST_CASE("enumeration guard refuses oversized problems") {
    const ModelSpec spec = tmaze::build_tmaze_model(0.9, 2.0, 8);
    Policy policy{std::vector<int>(8, 0)};
    CHECK_THROWS_AS(brute_force_evidence(spec, kPrior, policy), EnumerationLimitError);
    CHECK_THROWS_AS(brute_force_cbfe(spec, kPrior, policy), EnumerationLimitError);
}

TEST_CASE("mode-init failure is reported, not hidden") {
    // Degenerate reward likelihood with flat goals: the seeded outcome pair
    // is jointly impossible and the EM cannot recover.
    const ModelSpec spec = maze(1.0, 0.0);
    FreeEnergyReport report =
        optimize_cbfe(spec, kPrior, Policy{{3, 2}}, RestartMode::ModeInit);
    CHECK(std::isinf(report.value));
    CHECK_FALSE(report.converged);

    // The exhaustive restarts still find the global optimum.
    FreeEnergyReport full =
        optimize_cbfe(spec, kPrior, Policy{{3, 2}}, RestartMode::Exhaustive);
    const auto [oracle, ys] = brute_force_cbfe(spec, kPrior, Policy{{3, 2}});
    CHECK(full.value == doctest::Approx(oracle).epsilon(1e-11));
}
