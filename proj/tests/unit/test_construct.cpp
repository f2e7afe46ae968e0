#include <doctest.h>

#include <cmath>

#include "flatform/analyze.hpp"
#include "flatform/gen.hpp"
#include "helpers.hpp"

using namespace flatform;
using testing::parse_matrix;
using testing::vec;

namespace {

const Diagnostic* diag(const FlatChartResult& r, const std::string& name) {
    for (const auto& d : r.diagnostics)
        if (d.name == name) return &d;
    return nullptr;
}

}  // namespace

TEST_SUITE("construct") {
    TEST_CASE("ode integration hits requested times in both directions") {
        OdeRhs f = [](const OdeState& y, OdeState& dy, double) { dy = {y[1], -y[0]}; };
        const auto fwd = integrate_times(f, {0, 1}, 0, {0, 0.5, 1.0}, {});
        REQUIRE(fwd.size() == 3);
        CHECK(fwd[0][0] == 0);
        CHECK(fwd[2][0] == doctest::Approx(std::sin(1.0)).epsilon(1e-8));
        CHECK(integrate(f, {0, 1}, 0, -1, {})[0] == doctest::Approx(-std::sin(1.0)).epsilon(1e-8));
        // targets within roundoff of the start
        CHECK(integrate(f, {0, 1}, 0, 1e-18, {})[0] == doctest::Approx(1e-18));
    }

    TEST_CASE("gauss-legendre integrates polynomials exactly") {
        std::vector<double> x, w;
        gauss_legendre01(8, x, w);
        double s = 0;
        for (std::size_t i = 0; i < x.size(); ++i) s += w[i] * std::pow(x[i], 15);
        CHECK(s == doctest::Approx(1.0 / 16).epsilon(1e-14));
    }

    TEST_CASE("polar metric gets Cartesian coordinates") {
        const Problem p = load_problem(testing::data_path("polar.yaml"));
        const FlatChartResult r = construct(p);
        CHECK(r.method == "pfaffian");
        CHECK(r.max_deviation < 1e-5);
        CHECK((r.C - Eigen::MatrixXd::Identity(2, 2)).norm() < 1e-6);
        // f ↦ distance from the origin must be r
        const Grid grid(p.chart.box(), r.certify_grid);
        const Eigen::VectorXd f0 = r.chart.sample(p.chart.base()).y;
        const double r0 = p.chart.base()[0];
        for (std::size_t i = 0; i < grid.size(); i += 7) {
            const auto s = r.chart.sample(grid[i]);
            // |y − y_origin| = r for the Euclidean origin, which sits at distance r0 from y(base)
            const double t = grid[i][1] - p.chart.base()[1];
            CHECK((s.y - f0).norm() == doctest::Approx(std::sqrt(r0 * r0 + grid[i][0] * grid[i][0] -
                                                                 2 * r0 * grid[i][0] * std::cos(t))).epsilon(1e-6));
        }
        REQUIRE(diag(r, "loop_defect"));
        CHECK(diag(r, "loop_defect")->value < 1e-6);
    }

    TEST_CASE("parallel covectors are path independent only when flat") {
        const Tolerances tol;
        const MatrixJet flat(parse_matrix({{"1", "0"}, {"0", "r^2"}}, {"r", "t"}));
        auto tf = std::make_shared<const CovectorTransport>(flat, vec({1.5, 0.5}), tol);
        const ParallelCovector pf(tf, Eigen::MatrixXd::Identity(2, 2));
        CHECK(pf.loop_defect(Grid({{1, 2}, {0, 1}}, 4)) < 1e-7);

        const MatrixJet sphere(parse_matrix({{"1", "0"}, {"0", "sin(th)^2"}}, {"th", "ph"}));
        auto ts = std::make_shared<const CovectorTransport>(sphere, vec({1.0, 0.5}), tol);
        const ParallelCovector ps(ts, Eigen::MatrixXd::Identity(2, 2));
        CHECK(ps.loop_defect(Grid({{0.5, 1.5}, {0, 1}}, 4)) > 1e-3);
    }

    TEST_CASE("rank-one metric gives one flat function") {
        const Problem p = load_problem(testing::data_path("radial_rank1.yaml"));
        const FlatChartResult r = construct(p);
        CHECK(r.m == 1);
        CHECK(r.max_deviation < 1e-5);
        CHECK(std::abs(r.c(0, 0)) == 1);
        REQUIRE(r.f_values.size() == Grid(p.chart.box(), r.certify_grid).size());
        REQUIRE(diag(r, "zero_propagation"));
        CHECK(diag(r, "zero_propagation")->value <= 1e-9);
    }

    TEST_CASE("canonical symplectic form maps by the identity") {
        const Box box(4, Interval{-0.5, 0.5});
        const ExprMatrix w0 = parse_matrix({{"0", "1", "0", "0"}, {"-1", "0", "0", "0"}, {"0", "0", "0", "1"}, {"0", "0", "-1", "0"}},
                                           {"x", "y", "z", "w"});
        const FlatChartResult r = darboux_symplectic(TwoFormField::from(MatrixJet(w0)), box, Eigen::VectorXd::Zero(4), Tolerances{}, 3);
        CHECK(r.method == "moser");
        const Grid grid(r.chart.domain(), 3);
        for (const auto& q : grid.points()) {
            const auto s = r.chart.sample(q);
            CHECK((s.x - q).cwiseAbs().maxCoeff() < 1e-9);
            CHECK((s.dx_dy - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-9);
        }
        CHECK((symplectic_basis(canonical_symplectic(4)) - Eigen::MatrixXd::Identity(4, 4)).norm() < 1e-12);
    }

    TEST_CASE("linear symplectic normalization") {
        Eigen::MatrixXd w(4, 4);
        w << 0, 2, 1, 0, -2, 0, 0, 3, -1, 0, 0, 1, 0, -3, -1, 0;
        const Eigen::MatrixXd A = symplectic_basis(w);
        CHECK((A.transpose() * w * A - canonical_symplectic(4)).norm() < 1e-12);
    }

    TEST_CASE("perturbed symplectic form certifies") {
        const Problem p = load_problem(testing::data_path("darboux4.yaml"));
        const FlatChartResult r = construct(p);
        CHECK(r.max_deviation <= 1e-5);
        CHECK((r.C - canonical_symplectic(4)).norm() < 1e-9);
        // the Moser map is a symplectomorphism, so det = 1
        CHECK(r.chart.certificate() == doctest::Approx(1).epsilon(1e-6));
    }

    TEST_CASE("degenerate closed 2-form") {
        GenOptions o;
        o.seed = 5;
        o.n = 3;
        o.rank_g = 0;
        o.rank_w = 2;
        o.deform = 0.2;
        const Fixture fx = generate(o);
        const FlatChartResult r = construct(fx.problem);
        CHECK(r.method == "darboux-kernel");
        CHECK(r.max_deviation < 1e-5);
        REQUIRE(diag(r, "kernel_commutator"));
        CHECK(diag(r, "kernel_commutator")->pass);
    }

    TEST_CASE("g plus symplectic: h(x) example") {
        const Problem p = load_problem(testing::data_path("line_area.yaml"));
        const FlatChartResult r = construct(p);
        CHECK(r.method == "joint");
        CHECK(r.max_deviation < 1e-5);
        CHECK(r.m == 1);
        // pulled-back symmetric and skew parts are both constant
        CHECK(std::abs(r.C(0, 1) + r.C(1, 0)) < 1e-9 + std::abs(r.C(0, 1) - r.C(1, 0)));
    }

    TEST_CASE("general mixed case is reported as unsupported") {
        GenOptions o;
        o.seed = 2;
        o.n = 3;
        o.rank_g = 1;
        o.rank_w = 2;
        const Fixture fx = generate(o);
        CHECK(classify_case(fx.problem) == Case::General);
        CHECK_THROWS_AS(construct(fx.problem), UnsupportedCase);
    }

    TEST_CASE("verify accepts true charts and rejects wrong ones") {
        const Problem polar = load_problem(testing::data_path("polar.yaml"));
        const ChartFile good = load_chart_file(testing::data_path("cartesian_chart.yaml"), polar);
        const VerifyOutcome v = verify(polar, good);
        CHECK(v.pass);
        CHECK(v.result.max_deviation < 1e-12);
        const ChartFile wrong = parse_chart_file("schema: flatform-chart/1\nkind: coordinates\nmap: [r, t]\n", polar);
        const VerifyOutcome w = verify(polar, wrong);
        CHECK_FALSE(w.pass);
        CHECK(w.result.max_deviation == doctest::Approx(4 - 2.25));  // r² − r(base)²
        const ChartFile fold = parse_chart_file("map: [r, t^2]\n", polar);
        CHECK_FALSE(verify(polar, fold).invertible);
    }

    TEST_CASE("exported sampled charts verify") {
        const Problem p = load_problem(testing::data_path("line_area.yaml"));
        const FlatChartResult r = construct(p);
        // rebuild a sampled chart file from the certification samples
        std::string text = "schema: flatform-chart/1\nkind: sampled\nsamples:\n";
        const Grid grid(r.chart.domain(), 3);
        std::vector<Eigen::VectorXd> qs{r.chart.domain_base()};
        for (const auto& q : grid.points()) qs.push_back(q);
        auto list = [](const Eigen::VectorXd& v) {
            std::string s = "[";
            for (Eigen::Index i = 0; i < v.size(); ++i) s += (i ? ", " : "") + std::to_string(v[i]);
            return s + "]";
        };
        for (const auto& q : qs) {
            const auto s = r.chart.sample(q);
            text += "  - y: " + list(s.y) + "\n    x: " + list(s.x) + "\n    dx_dy: [";
            for (Eigen::Index i = 0; i < 2; ++i) text += (i ? ", " : "") + list(s.dx_dy.row(i).transpose());
            text += "]\n";
        }
        const VerifyOutcome v = verify(p, parse_chart_file(text, p));
        // std::to_string keeps six decimals, so the bar is loose here
        CHECK(v.result.max_deviation < 1e-4);
        CHECK(v.invertible);
    }
}
