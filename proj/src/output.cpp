#include "cbfe/output.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <sstream>
#include <thread>

#include "cbfe/errors.hpp"
#include "cbfe/tmaze.hpp"

namespace cbfe {
namespace output {

namespace {

constexpr double kTol = 1e-9;
const double kInf = std::numeric_limits<double>::infinity();

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.15g", v);
    return buf;
}

std::string policy_label(const Policy& policy) {
    std::string out = "(";
    for (std::size_t i = 0; i < policy.controls.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(policy.controls[i] + 1);
    }
    return out + ")";
}

std::vector<std::string> move_labels(std::size_t n) {
    std::vector<std::string> labels;
    for (std::size_t i = 1; i <= n; ++i) labels.push_back(std::to_string(i));
    return labels;
}

std::vector<std::pair<int, int>> mark_cells(const std::vector<double>& values,
                                            std::size_t cols, bool minimize) {
    double best = minimize ? kInf : -kInf;
    for (double v : values) best = minimize ? std::min(best, v) : std::max(best, v);
    std::vector<std::pair<int, int>> marks;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (std::abs(values[i] - best) <= kTol) {
            marks.emplace_back(static_cast<int>(i / cols),
                               static_cast<int>(i % cols));
        }
    }
    return marks;
}

}  // namespace

Format format_from_string(const std::string& name) {
    if (name == "csv") return Format::Csv;
    if (name == "json") return Format::Json;
    if (name == "svg") return Format::Svg;
    throw DimensionError("unknown output format '" + name + "'");
}

// ---------------------------------------------------------------------------
// Renderers
// ---------------------------------------------------------------------------

std::string render_csv(const ExperimentOutput& out) {
    std::ostringstream os;
    for (auto it = out.metadata.begin(); it != out.metadata.end(); ++it) {
        os << "# " << it.key() << ": ";
        if (it.value().is_string()) {
            os << it.value().get<std::string>();
        } else {
            os << it.value().dump();
        }
        os << "\n";
    }
    for (const auto& note : out.footnotes) os << "# note: " << note << "\n";
    for (const auto& grid : out.grids) {
        os << "# grid: " << grid.title;
        if (!grid.marks.empty()) {
            os << "; " << grid.mark_meaning << ":";
            for (const auto& [r, c] : grid.marks) {
                os << " (" << grid.row_labels[r] << "," << grid.col_labels[c] << ")";
            }
        }
        os << "\n";
        os << grid.title;
        for (const auto& label : grid.col_labels) os << "," << label;
        os << "\n";
        for (std::size_t r = 0; r < grid.row_labels.size(); ++r) {
            os << grid.row_labels[r];
            for (std::size_t c = 0; c < grid.col_labels.size(); ++c) {
                os << "," << fmt(grid.at(r, c));
            }
            os << "\n";
        }
    }
    return os.str();
}

namespace {

nlohmann::json grid_to_json(const GridPayload& grid) {
    nlohmann::json j;
    j["title"] = grid.title;
    j["row_labels"] = grid.row_labels;
    j["col_labels"] = grid.col_labels;
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t r = 0; r < grid.row_labels.size(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (std::size_t c = 0; c < grid.col_labels.size(); ++c) {
            double v = grid.at(r, c);
            if (std::isfinite(v)) {
                row.push_back(v);
            } else {
                row.push_back(v > 0 ? "inf" : "-inf");
            }
        }
        rows.push_back(std::move(row));
    }
    j["values"] = std::move(rows);
    j["mark_meaning"] = grid.mark_meaning;
    nlohmann::json marks = nlohmann::json::array();
    for (const auto& [r, c] : grid.marks) marks.push_back({r, c});
    j["marks"] = std::move(marks);
    return j;
}

}  // namespace

std::string render_json(const ExperimentOutput& out) {
    nlohmann::json j;
    j["metadata"] = out.metadata;
    j["footnotes"] = out.footnotes;
    j["grids"] = nlohmann::json::array();
    for (const auto& grid : out.grids) j["grids"].push_back(grid_to_json(grid));
    return j.dump(2) + "\n";
}

std::string render_svg(const ExperimentOutput& out) {
    constexpr int cell = 46;
    constexpr int left = 110;
    constexpr int top = 40;
    constexpr int gap = 60;

    std::size_t max_cols = 0;
    int height = 10;
    for (const auto& grid : out.grids) {
        max_cols = std::max(max_cols, grid.col_labels.size());
        height += top + cell * static_cast<int>(grid.row_labels.size()) + gap;
    }
    const int width = left + cell * static_cast<int>(max_cols) + 30;

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
       << "\" height=\"" << height << "\" font-family=\"monospace\" font-size=\"12\">\n";
    int y0 = 10;
    for (const auto& grid : out.grids) {
        double lo = kInf, hi = -kInf;
        for (double v : grid.values) {
            if (std::isfinite(v)) {
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
        }
        if (!(hi > lo)) {
            lo = lo - 1.0;
            hi = hi + 1.0;
        }
        os << "  <text x=\"10\" y=\"" << y0 + 14 << "\" font-weight=\"bold\">"
           << grid.title << "</text>\n";
        for (std::size_t c = 0; c < grid.col_labels.size(); ++c) {
            os << "  <text x=\"" << left + cell * c + cell / 2 << "\" y=\""
               << y0 + top - 6 << "\" text-anchor=\"middle\">" << grid.col_labels[c]
               << "</text>\n";
        }
        for (std::size_t r = 0; r < grid.row_labels.size(); ++r) {
            os << "  <text x=\"" << left - 8 << "\" y=\""
               << y0 + top + cell * r + cell / 2 + 4 << "\" text-anchor=\"end\">"
               << grid.row_labels[r] << "</text>\n";
            for (std::size_t c = 0; c < grid.col_labels.size(); ++c) {
                const double v = grid.at(r, c);
                int shade = 255;
                if (std::isfinite(v)) {
                    const double t = (v - lo) / (hi - lo);
                    shade = static_cast<int>(235 - 180 * t);
                }
                const bool marked =
                    std::find(grid.marks.begin(), grid.marks.end(),
                              std::make_pair(static_cast<int>(r),
                                             static_cast<int>(c))) != grid.marks.end();
                os << "  <rect x=\"" << left + cell * c << "\" y=\"" << y0 + top + cell * r
                   << "\" width=\"" << cell << "\" height=\"" << cell
                   << "\" fill=\"rgb(" << shade << "," << shade << ",255)\" stroke=\""
                   << (marked ? "red" : "gray") << "\" stroke-width=\""
                   << (marked ? 3 : 1) << "\" data-row=\"" << r << "\" data-col=\"" << c
                   << "\" data-value=\"" << fmt(v) << "\"/>\n";
                os << "  <text x=\"" << left + cell * c + cell / 2 << "\" y=\""
                   << y0 + top + cell * r + cell / 2 + 4
                   << "\" text-anchor=\"middle\" font-size=\"9\">";
                if (std::isfinite(v)) {
                    char buf[32];
                    std::snprintf(buf, sizeof(buf), "%.3g", v);
                    os << buf << (marked ? "*" : "");
                } else {
                    os << "inf";
                }
                os << "</text>\n";
            }
        }
        y0 += top + cell * static_cast<int>(grid.row_labels.size()) + gap;
    }
    os << "</svg>\n";
    return os.str();
}

std::string render(const ExperimentOutput& out, Format format) {
    switch (format) {
        case Format::Csv: return render_csv(out);
        case Format::Json: return render_json(out);
        case Format::Svg: return render_svg(out);
    }
    return {};
}

// ---------------------------------------------------------------------------
// Experiments
// ---------------------------------------------------------------------------

ExperimentOutput bandit_output() {
    const BanditModel model = tmaze::build_bandit_model();
    ExperimentOutput out;
    out.metadata["command"] = "bandit";
    out.metadata["version"] = kToolVersion;

    GridPayload grid;
    grid.title = "policy";
    grid.mark_meaning = "argmin per column";
    grid.row_labels = {"ignorant(u=0)", "informative(u=1)"};
    grid.col_labels = {"BFE", "CBFE"};
    for (int control = 0; control <= 1; ++control) {
        const auto bfe = solve_bandit_bfe(model, control);
        const auto cbfe = solve_bandit_cbfe(model, control, RestartMode::Exhaustive);
        grid.values.push_back(bfe.report.value);
        grid.values.push_back(cbfe.report.value);
        out.metadata["cbfe_outcome_u" + std::to_string(control)] =
            static_cast<int>(cbfe.report.optimal_outcomes->front());
    }
    for (std::size_t c = 0; c < 2; ++c) {
        double best = std::min(grid.values[c], grid.values[2 + c]);
        for (std::size_t r = 0; r < 2; ++r) {
            if (std::abs(grid.at(r, c) - best) <= kTol) {
                grid.marks.emplace_back(static_cast<int>(r), static_cast<int>(c));
            }
        }
    }
    out.grids.push_back(std::move(grid));
    out.footnotes.push_back(
        "The constrained value of the ignorant policy is +1 bit = -log2(1/2): "
        "committing to an outcome the policy cannot resolve is penalized. A "
        "negated value for this entry would reward ignorance instead; the "
        "positive sign follows from -log2 p(y|u).");
    return out;
}

namespace {

GridPayload policy_grid(const std::string& title, const std::string& mark_meaning,
                        std::size_t num_controls, std::vector<double> values,
                        bool minimize) {
    GridPayload grid;
    grid.title = title;
    grid.mark_meaning = mark_meaning;
    grid.row_labels = move_labels(num_controls);
    grid.col_labels = move_labels(num_controls);
    grid.marks = mark_cells(values, num_controls, minimize);
    grid.values = std::move(values);
    return grid;
}

}  // namespace

ExperimentOutput grid_output(Objective objective, double alpha, double utility,
                             int horizon, RestartMode restart_mode) {
    const ModelSpec spec = tmaze::build_tmaze_model(alpha, utility, horizon);
    const Categorical prior = tmaze::initial_state_prior();
    const auto policies = enumerate_policies(spec.num_controls(), horizon);

    std::vector<double> values;
    for (const Policy& policy : policies) {
        switch (objective) {
            case Objective::Bfe:
                values.push_back(optimize_bfe(spec, prior, policy).value);
                break;
            case Objective::Cbfe:
                values.push_back(
                    optimize_cbfe(spec, prior, policy, restart_mode).value);
                break;
            case Objective::Efe:
                values.push_back(efe(spec, prior, policy));
                break;
        }
    }

    ExperimentOutput out;
    out.metadata["command"] = "grid";
    out.metadata["objective"] = to_string(objective);
    out.metadata["alpha"] = alpha;
    out.metadata["c"] = utility;
    out.metadata["horizon"] = horizon;
    if (objective == Objective::Cbfe) {
        out.metadata["restarts"] =
            restart_mode == RestartMode::Exhaustive ? "exhaustive" : "mode-init";
    }
    out.metadata["version"] = kToolVersion;

    GridPayload grid = policy_grid("first\\second", "argmin", spec.num_controls(),
                                   std::move(values), true);
    nlohmann::json argmin = nlohmann::json::array();
    for (const auto& [r, c] : grid.marks) {
        argmin.push_back("(" + std::to_string(r + 1) + "," + std::to_string(c + 1) + ")");
    }
    out.metadata["argmin"] = std::move(argmin);
    out.grids.push_back(std::move(grid));
    return out;
}

ExperimentOutput decompose_output(double alpha, double utility, int horizon,
                                  RestartMode restart_mode) {
    const ModelSpec spec = tmaze::build_tmaze_model(alpha, utility, horizon);
    const Categorical prior = tmaze::initial_state_prior();
    const auto policies = enumerate_policies(spec.num_controls(), horizon);

    std::vector<double> opportunity, risk, extrinsic;
    for (const Policy& policy : policies) {
        const CbfeSolution solution = solve_cbfe(spec, prior, policy, restart_mode);
        const CbfeDecomposition d = cbfe_decompose(spec, prior, policy, solution);
        opportunity.push_back(d.opportunity);
        risk.push_back(d.risk);
        extrinsic.push_back(d.extrinsic_value);
    }

    ExperimentOutput out;
    out.metadata["command"] = "decompose";
    out.metadata["alpha"] = alpha;
    out.metadata["c"] = utility;
    out.metadata["horizon"] = horizon;
    out.metadata["version"] = kToolVersion;
    out.grids.push_back(policy_grid("opportunity", "max", spec.num_controls(),
                                    std::move(opportunity), false));
    out.grids.push_back(
        policy_grid("risk", "min", spec.num_controls(), std::move(risk), true));
    out.grids.push_back(policy_grid("extrinsic", "max", spec.num_controls(),
                                    std::move(extrinsic), false));
    return out;
}

int resolve_threads(int requested) {
    int threads = requested;
    if (threads <= 0) {
        threads = static_cast<int>(std::thread::hardware_concurrency());
        if (threads <= 0) threads = 1;
    }
    if (const char* cap = std::getenv("CBFE_AIF_THREADS")) {
        const int limit = std::atoi(cap);
        if (limit > 0) threads = std::min(threads, limit);
    }
    return threads;
}

std::vector<double> linspace(double lo, double hi, int steps) {
    if (steps < 1) throw DimensionError("linspace: steps must be positive");
    std::vector<double> out;
    if (steps == 1) {
        out.push_back((lo + hi) / 2.0);
        return out;
    }
    for (int i = 0; i < steps; ++i) {
        out.push_back(lo + (hi - lo) * i / (steps - 1));
    }
    return out;
}

ExperimentOutput landscape_output(const LandscapeParams& params) {
    AgentConfig config;
    config.objective = params.objective;
    config.horizon = params.horizon;
    config.restart_mode = params.restart_mode;
    config.tie_break_seed = params.seed;

    const std::vector<double> alphas =
        linspace(params.alpha_min, params.alpha_max, params.alpha_steps);
    const std::vector<double> utilities =
        linspace(params.c_min, params.c_max, params.c_steps);
    const LandscapeResult landscape =
        run_landscape(config, alphas, utilities, params.runs, params.reward_arm,
                      params.moves, params.seed, resolve_threads(params.threads));

    ExperimentOutput out;
    out.metadata["command"] = "landscape";
    out.metadata["objective"] = to_string(params.objective);
    out.metadata["alpha_min"] = params.alpha_min;
    out.metadata["alpha_max"] = params.alpha_max;
    out.metadata["alpha_steps"] = params.alpha_steps;
    out.metadata["c_min"] = params.c_min;
    out.metadata["c_max"] = params.c_max;
    out.metadata["c_steps"] = params.c_steps;
    out.metadata["runs"] = params.runs;
    out.metadata["moves"] = params.moves;
    out.metadata["horizon"] = params.horizon;
    out.metadata["reward_arm"] = params.reward_arm;
    out.metadata["seed"] = params.seed;
    out.metadata["zero_cells"] = landscape.zero_cell_count();
    out.metadata["version"] = kToolVersion;

    GridPayload grid;
    grid.title = "alpha\\c";
    grid.mark_meaning = "max";
    for (double a : alphas) grid.row_labels.push_back(fmt(a));
    for (double c : utilities) grid.col_labels.push_back(fmt(c));
    grid.values = landscape.rewards;
    grid.marks = mark_cells(grid.values, utilities.size(), false);
    out.grids.push_back(std::move(grid));
    return out;
}

// ---------------------------------------------------------------------------
// Verification
// ---------------------------------------------------------------------------

bool VerifyReport::all_passed() const {
    return std::all_of(checks.begin(), checks.end(),
                       [](const CheckResult& c) { return c.passed; });
}

namespace {

// Swaps the reward/no-reward likelihoods for one state so the engine model
// disagrees with the oracle model (no-op at alpha = 0.5).
ModelSpec perturb_observation_model(const ModelSpec& spec) {
    auto rows = spec.A.to_nested();
    std::swap(rows[tmaze::codec::observation_index(2, tmaze::kOutcomeReward)]
                  [tmaze::codec::state_index(2, 2)],
              rows[tmaze::codec::observation_index(2, tmaze::kOutcomeNoReward)]
                  [tmaze::codec::state_index(2, 2)]);
    ModelSpec out = spec;
    out.A = StochasticMatrix(rows);
    return out;
}

struct Deviation {
    double max = 0.0;
    std::string where;

    void update(double dev, const std::string& context) {
        if (dev > max) {
            max = dev;
            where = context;
        }
    }
};

}  // namespace

VerifyReport run_verify(bool inject_perturbation) {
    const std::vector<double> alphas = {0.5, 0.9, 1.0};
    const std::vector<double> utilities = {0.0, 2.0};
    const Categorical prior = tmaze::initial_state_prior();

    Deviation tree, oracle, identities, bound, efe_forms;
    double bound_final_gap = 0.0;
    int pairs = 0;

    for (double alpha : alphas) {
        for (double utility : utilities) {
            const ModelSpec spec = tmaze::build_tmaze_model(alpha, utility, 2);
            const ModelSpec engine =
                inject_perturbation ? perturb_observation_model(spec) : spec;
            for (const Policy& policy : enumerate_policies(spec.num_controls(), 2)) {
                ++pairs;
                const std::string context =
                    "alpha=" + fmt(alpha) + " c=" + fmt(utility) +
                    " policy=" + policy_label(policy);

                // Unconstrained optimum against enumerated evidence.
                const BfeSolution bfe = solve_bfe(engine, prior, policy);
                const double evidence = brute_force_evidence(spec, prior, policy);
                tree.update(std::abs(bfe.report.value + std::log2(evidence)), context);

                // Constrained optimum against the enumeration oracle.
                const CbfeSolution cbfe =
                    solve_cbfe(engine, prior, policy, RestartMode::Exhaustive);
                const auto [oracle_value, oracle_ys] =
                    brute_force_cbfe(spec, prior, policy);
                oracle.update(std::abs(cbfe.report.value - oracle_value), context);

                // Decomposition identities.
                const CbfeDecomposition d = cbfe_decompose(engine, prior, policy, cbfe);
                identities.update(std::abs((-d.opportunity + d.risk -
                                            d.extrinsic_value) -
                                           cbfe.report.value),
                                  context + " [opportunity/risk]");
                identities.update(
                    std::abs((d.posterior_divergence - d.epistemic_value_of_policy -
                              d.extrinsic_value) -
                             cbfe.report.value),
                    context + " [epistemic]");
                identities.update(std::max(0.0, -d.posterior_divergence),
                                  context + " [posterior divergence sign]");
                identities.update(std::max(0.0, -d.risk), context + " [risk sign]");
                const BfeDecomposition bd = bfe_decompose(engine, prior, policy, bfe);
                identities.update(
                    std::abs((bd.expected_divergence + bd.risk -
                              bd.expected_extrinsic_value) -
                             bfe.report.value),
                    context + " [expected divergence]");
                identities.update(std::max(0.0, -bd.expected_divergence),
                                  context + " [expected divergence sign]");

                // Epistemic-value bound along the EM iterates.
                for (std::size_t s = 0; s < cbfe.sweep_history.size(); ++s) {
                    const BeliefState& snapshot = cbfe.sweep_history[s];
                    std::vector<std::size_t> ys;
                    for (int e : cbfe.layout.y_edges) ys.push_back(*snapshot.outcome(e));
                    CbfeDecomposition ds;
                    try {
                        ds = cbfe_decompose(engine, prior, policy, cbfe.graph,
                                            cbfe.layout, snapshot, ys);
                    } catch (const InconsistencyError&) {
                        continue;
                    }
                    const double gap = ds.epistemic_value_of_policy -
                                       (ds.opportunity - ds.risk);
                    if (!std::isfinite(gap)) continue;
                    bound.update(std::max(0.0, gap),
                                 context + " sweep " + std::to_string(s + 1));
                    if (s + 1 == cbfe.sweep_history.size()) {
                        // The bound is tight once the point masses settle.
                        bound.update(std::abs(gap), context + " final sweep");
                        bound_final_gap = std::max(bound_final_gap, std::abs(gap));
                    }
                }

                // Two routes to the instantaneous expected free energy.
                std::vector<int> prefix;
                for (int u : policy.controls) {
                    prefix.push_back(u);
                    const auto [factored, direct] =
                        efe_instantaneous_check(spec, prior, prefix);
                    if (std::isfinite(factored) || std::isfinite(direct)) {
                        efe_forms.update(std::abs(factored - direct),
                                         context + " tau=" +
                                             std::to_string(prefix.size()));
                    }
                }
            }
        }
    }

    VerifyReport report;
    auto add = [&](const std::string& name, const Deviation& dev, double tol,
                   const std::string& extra = "") {
        CheckResult check;
        check.name = name;
        check.max_deviation = dev.max;
        check.passed = dev.max <= tol;
        check.detail = std::to_string(pairs) + " pairs";
        if (!check.passed) check.detail += "; worst at " + dev.where;
        if (!extra.empty()) check.detail += "; " + extra;
        report.checks.push_back(std::move(check));
    };
    add("tree-exactness", tree, kTol);
    add("cbfe-oracle-equivalence", oracle, kTol);
    add("decomposition-identities", identities, kTol);
    add("epistemic-bound", bound, kTol,
        "final-iterate gap " + fmt(bound_final_gap));
    add("efe-two-form", efe_forms, kTol);
    return report;
}

std::string render_verify(const VerifyReport& report) {
    std::ostringstream os;
    for (const auto& check : report.checks) {
        os << (check.passed ? "PASS" : "FAIL") << " " << check.name
           << " (max deviation " << fmt(check.max_deviation) << "; " << check.detail
           << ")\n";
    }
    os << (report.all_passed() ? "all checks passed" : "verification FAILED") << "\n";
    return os.str();
}

}  // namespace output
}  // namespace cbfe
