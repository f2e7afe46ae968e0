#include <doctest.h>

#include "flatform/gen.hpp"
#include "flatform/problem.hpp"
#include "flatform/report.hpp"
#include "helpers.hpp"

using namespace flatform;

namespace {

std::string where_of(const std::string& text) {
    try {
        parse_problem(text);
    } catch (const ProblemError& e) {
        return e.where();
    }
    return "<no error>";
}

const char* kPlane = R"yaml(schema: flatform-problem/1
chart:
  variables: [x, y]
  box: [[0, 1], [0, pi/2]]
  base: [0.5, 0.5]
form:
  - ["1", "x"]
  - ["-x", "exp(y)"]
grid: 5
tolerances:
  tol_flat: 1e-6
  richardson: 2
)yaml";

}  // namespace

TEST_SUITE("problem") {
    TEST_CASE("parses a complete problem") {
        const Problem p = parse_problem(kPlane);
        CHECK(p.dim() == 2);
        CHECK(p.chart.box()[1].hi == doctest::Approx(M_PI / 2));
        CHECK(p.grid_per_axis() == 5);
        CHECK(p.tol.tol_flat == 1e-6);
        CHECK(p.tol.richardson == 2);
        CHECK(p.g(0, 1).is_zero());
        CHECK(p.w(0, 1).var_index() == 0);
    }

    TEST_CASE("JSON input is accepted") {
        const Problem p = parse_problem(
            R"({"schema": "flatform-problem/1", "chart": {"variables": ["u"], "box": [[0, 1]]}, "form": [["u^2"]]})");
        CHECK(p.dim() == 1);
        CHECK(p.chart.base()[0] == 0.5);
    }

    TEST_CASE("errors point at the offending key") {
        std::string t = kPlane;
        CHECK(where_of(std::string(t).replace(t.find("exp(y)"), 6, "exp(q)")) == "form[1][1]");
        CHECK(where_of(std::string(t).replace(t.find("tol_flat"), 8, "tol_flit")) == "tolerances.tol_flit");
        CHECK(where_of(std::string(t).replace(t.find("grid: 5"), 7, "grid: 1")) == "grid");
        CHECK(where_of(std::string(t).replace(t.find("problem/1"), 9, "report/1")) == "schema");
        CHECK(where_of(std::string(t).replace(t.find("base: [0.5, 0.5]"), 16, "base: [2, 0.5]")) == "chart.base");
        CHECK(where_of(R"(chart: {variables: [x, y], box: [[0, 1], [0, 1]]}
form: [["1", "0"]])") == "form");
        CHECK(where_of(R"(chart: {variables: [x], box: [[1, 0]]}
form: [["1"]])") == "chart.box[0]");
    }

    TEST_CASE("round trip through YAML") {
        const Problem p = parse_problem(kPlane);
        const Problem q = parse_problem(problem_to_yaml(p));
        CHECK(q.rows == p.rows);
        CHECK(q.grid == p.grid);
        CHECK(q.chart.names() == p.chart.names());
    }

    TEST_CASE("chart file kinds") {
        const Problem p = parse_problem(kPlane);
        const ChartFile c = parse_chart_file("map: [x + y, y]\n", p);
        CHECK(c.kind == "coordinates");
        const ChartFile q = parse_chart_file(R"(kind: parametrization
variables: [u, v]
box: [[0, 1], [0, 1]]
map: [u, v - u]
)", p);
        CHECK(q.map.kind() == ChartMap::Kind::Parametrization);
        CHECK_THROWS_AS(parse_chart_file("map: [x]\n", p), ProblemError);
        CHECK_THROWS_AS(parse_chart_file("kind: other\nmap: [x, y]\n", p), ProblemError);
        CHECK_THROWS_AS(parse_chart_file("kind: sampled\nsamples: []\n", p), ProblemError);
    }

    TEST_CASE("sampled charts keep full double precision") {
        const Problem p = parse_problem(kPlane);
        const ChartFile c = parse_chart_file(R"({"kind": "sampled", "samples": [
  {"y": [0.0, 0.0], "x": [0.0033750000000000026, 1e-300],
   "dx_dy": [[-9.868649107779169e-17, 1.0], [1.0, 0.0]]}]})", p);
        REQUIRE(c.samples.size() == 1);
        CHECK(c.samples[0].x[0] == 0.0033750000000000026);
        CHECK(c.samples[0].x[1] == 1e-300);
        CHECK(c.samples[0].dx_dy(0, 0) == -9.868649107779169e-17);
        CHECK_THROWS_AS(parse_chart_file(R"({"kind": "sampled", "samples": [
  {"y": [0, 0], "x": [1e999, 0], "dx_dy": [[1, 0], [0, 1]]}]})", p), ProblemError);
    }
}

TEST_SUITE("gen") {
    TEST_CASE("polynomial algebra") {
        const Poly x = Poly::variable(2, 0), y = Poly::variable(2, 1);
        const Poly p = x * x * y + y * Rational(-3);
        CHECK(p.degree() == 3);
        CHECK(p.diff(0).str({"x", "y"}) == "2*x*y");
        CHECK(p.str({"x", "y"}) == "x^2*y - 3*y");
        CHECK((p - p).is_zero());
        CHECK(p.eval(testing::vec({2, 1})) == 1);
    }

    TEST_CASE("generated charts flatten the generated form") {
        for (int n = 2; n <= 3; ++n) {
            GenOptions o;
            o.seed = 11;
            o.n = n;
            o.rank_g = n - 1;
            o.rank_w = 2;
            o.deform = 0.2;
            const Fixture fx = generate(o);
            std::string map = "map: [";
            for (std::size_t i = 0; i < fx.chart.size(); ++i) map += (i ? ", \"" : "\"") + fx.chart[i] + "\"";
            const ChartFile cf = parse_chart_file(map + "]\n", fx.problem);
            const VerifyOutcome v = verify(fx.problem, cf);
            CHECK(v.pass);
            CHECK((v.result.C - fx.C).norm() < 1e-9);
        }
    }

    TEST_CASE("seeds are reproducible") {
        GenOptions o;
        o.seed = 3;
        o.n = 3;
        o.rank_g = 2;
        CHECK(generate(o).problem.rows == generate(o).problem.rows);
        o.rank_w = 1;
        CHECK_THROWS_AS(generate(o), std::invalid_argument);
    }
}

TEST_SUITE("report") {
    TEST_CASE("schema fields and non-finite values") {
        const Problem p = parse_problem(kPlane);
        const Json h = report_header("analyze", p, 1);
        CHECK(h["schema"] == kReportSchema);
        CHECK(h["config"]["variables"].size() == 2);
        CHECK(h["config"]["tolerances"]["tol_flat"] == 1e-6);
        Eigen::VectorXd v(2);
        v << 1, INFINITY;
        CHECK(vector_json(v)[1].is_null());
        const Json a = analysis_json(analyze(parse_problem(R"(chart: {variables: [x, y], box: [[1, 2], [0, 1]]}
form: [["1", "0"], ["0", "x^2"]])")));
        CHECK(a["verdict"] == "FLAT");
        CHECK(a["case"] == "symmetric");
        CHECK(a["conditions"].is_array());
    }
}
