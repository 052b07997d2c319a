#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <regex>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cbfe/output.hpp"

using namespace cbfe;
using namespace cbfe::output;

namespace {

// Data cells of every grid in a rendered CSV: everything after the row label
// on the rows following each header line.
std::vector<std::string> csv_cells(const std::string& csv) {
    std::vector<std::string> cells;
    std::istringstream is(csv);
    std::string line;
    bool header_pending = false;
    while (std::getline(is, line)) {
        if (line.rfind("# grid:", 0) == 0) {
            header_pending = true;
            continue;
        }
        if (line.empty() || line[0] == '#') continue;
        if (header_pending) {  // column-label row
            header_pending = false;
            continue;
        }
        std::size_t pos = line.find(',');
        if (pos == std::string::npos) continue;
        ++pos;
        while (pos <= line.size()) {
            std::size_t next = line.find(',', pos);
            if (next == std::string::npos) next = line.size();
            cells.push_back(line.substr(pos, next - pos));
            pos = next + 1;
        }
    }
    return cells;
}

}  // namespace

TEST_CASE("bandit table values") {
    ExperimentOutput out = bandit_output();
    REQUIRE(out.grids.size() == 1);
    const GridPayload& grid = out.grids[0];
    CHECK(grid.at(0, 0) == doctest::Approx(0.0));  // unconstrained, ignorant
    CHECK(grid.at(1, 0) == doctest::Approx(0.0));  // unconstrained, informative
    CHECK(grid.at(0, 1) == doctest::Approx(1.0));  // constrained, ignorant
    CHECK(grid.at(1, 1) == doctest::Approx(0.0));  // constrained, informative
    CHECK(!out.footnotes.empty());
}

TEST_CASE("policy grid output marks the argmin set") {
    ExperimentOutput out = grid_output(Objective::Cbfe, 0.9, 2.0);
    REQUIRE(out.grids.size() == 1);
    const GridPayload& grid = out.grids[0];
    CHECK(grid.marks == std::vector<std::pair<int, int>>{{3, 1}, {3, 2}});
    CHECK(out.metadata["argmin"].dump() == "[\"(4,2)\",\"(4,3)\"]");

    ExperimentOutput flat = grid_output(Objective::Bfe, 0.9, 0.0);
    CHECK(flat.grids[0].marks.size() == 16);

    ExperimentOutput efe_low = grid_output(Objective::Efe, 0.5, 2.0);
    CHECK(efe_low.grids[0].marks == std::vector<std::pair<int, int>>{{3, 3}});
}

TEST_CASE("decomposition grids mark their own optima") {
    ExperimentOutput out = decompose_output(0.9, 2.0);
    REQUIRE(out.grids.size() == 3);
    CHECK(out.grids[0].title == "opportunity");
    CHECK(out.grids[0].at(0, 0) == doctest::Approx(-2.0).epsilon(1e-9));

    // Risk marks include the stay-put policy.
    const auto& risk_marks = out.grids[1].marks;
    CHECK(std::find(risk_marks.begin(), risk_marks.end(), std::make_pair(0, 0)) !=
          risk_marks.end());

    // Zero utility flattens the extrinsic landscape.
    ExperimentOutput flat = decompose_output(0.9, 0.0);
    const GridPayload& extrinsic = flat.grids[2];
    for (double v : extrinsic.values) {
        CHECK(v == doctest::Approx(extrinsic.values[0]).epsilon(1e-12));
    }
}

TEST_CASE("csv rendering is deterministic and carries full precision") {
    ExperimentOutput out = grid_output(Objective::Cbfe, 0.9, 2.0);
    std::string a = render_csv(out);
    std::string b = render_csv(grid_output(Objective::Cbfe, 0.9, 2.0));
    CHECK(a == b);

    // Numeric cells round-trip through strtod at full double precision.
    for (const std::string& cell : csv_cells(a)) {
        double parsed = std::strtod(cell.c_str(), nullptr);
        char rendered[64];
        std::snprintf(rendered, sizeof(rendered), "%.15g", parsed);
        CHECK(cell == rendered);
    }
}

TEST_CASE("json rendering round-trips the grid losslessly") {
    ExperimentOutput out = grid_output(Objective::Cbfe, 0.9, 2.0);
    nlohmann::json j = nlohmann::json::parse(render_json(out));
    const auto& values = j["grids"][0]["values"];
    for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 4; ++c) {
            CHECK(values[r][c].get<double>() == out.grids[0].at(r, c));
        }
    }
    CHECK(j["metadata"]["command"] == "grid");
}

TEST_CASE("svg cells embed the same matrix as the csv") {
    ExperimentOutput out = grid_output(Objective::Efe, 0.9, 2.0);
    std::string svg = render_svg(out);

    std::regex attr("data-value=\"([^\"]*)\"");
    std::vector<std::string> values;
    for (auto it = std::sregex_iterator(svg.begin(), svg.end(), attr);
         it != std::sregex_iterator(); ++it) {
        values.push_back((*it)[1]);
    }
    REQUIRE(values.size() == 16);

    const std::vector<std::string> cells = csv_cells(render_csv(out));
    CHECK(values == cells);
}

TEST_CASE("landscape output carries the zero-cell count and stays byte-stable") {
    LandscapeParams params;
    params.objective = Objective::Cbfe;
    params.alpha_steps = 2;
    params.c_steps = 2;
    params.runs = 2;
    params.seed = 3;
    ExperimentOutput a = landscape_output(params);
    ExperimentOutput b = landscape_output(params);
    CHECK(render_csv(a) == render_csv(b));
    CHECK(a.metadata.contains("zero_cells"));
    CHECK(a.grids[0].row_labels.size() == 2);
    CHECK(a.grids[0].col_labels.size() == 2);
}

TEST_CASE("thread cap honors the environment variable") {
    setenv("CBFE_AIF_THREADS", "1", 1);
    CHECK(resolve_threads(8) == 1);
    unsetenv("CBFE_AIF_THREADS");
    CHECK(resolve_threads(8) == 8);
}

TEST_CASE("linspace endpoints") {
    auto g = linspace(0.5, 1.0, 10);
    CHECK(g.size() == 10);
    CHECK(g.front() == doctest::Approx(0.5));
    CHECK(g.back() == doctest::Approx(1.0));
    CHECK(linspace(0.0, 2.0, 1) == std::vector<double>{1.0});
}

TEST_CASE("verification suite flags an injected model perturbation") {
    VerifyReport broken = run_verify(true);
    CHECK_FALSE(broken.all_passed());
    bool tree_failed = false;
    for (const auto& check : broken.checks) {
        if (check.name == "tree-exactness") {
            tree_failed = !check.passed;
            CHECK(check.detail.find("policy") != std::string::npos);
        }
    }
    CHECK(tree_failed);
    std::string text = render_verify(broken);
    CHECK(text.find("FAIL") != std::string::npos);
}
