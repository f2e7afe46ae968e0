#include <doctest.h>

#include <cmath>

#include "flatform/connection.hpp"
#include "helpers.hpp"

using namespace flatform;
using testing::parse_matrix;
using testing::vec;

TEST_SUITE("connection") {
    const std::vector<std::string> rt{"r", "t"};
    const std::vector<std::string> xy{"x", "y"};

    TEST_CASE("first-kind symbols of the polar metric") {
        const ChristoffelFirst c(parse_matrix({{"1", "0"}, {"0", "r^2"}}, rt));
        const auto v = c.eval(vec({1.5, 0.3}));
        auto at = [&](int i, int j, int s) { return v[static_cast<std::size_t>((i * 2 + j) * 2 + s)]; };
        CHECK(at(1, 1, 0) == doctest::Approx(-1.5));
        CHECK(at(0, 1, 1) == doctest::Approx(1.5));
        CHECK(at(1, 0, 1) == doctest::Approx(1.5));
        CHECK(at(0, 0, 0) == 0.0);
    }

    TEST_CASE("nondegenerate system gives Levi-Civita") {
        const MatrixJet g(parse_matrix({{"1", "0"}, {"0", "r^2"}}, rt));
        const ConnectionSystem sys(&g, nullptr, 1e-8, 1e-7);
        CHECK(sys.imposed() == Imposed::G);
        const auto s = sys.solve(vec({2, 0.1}));
        CHECK(s.solvable());
        CHECK(s.gamma(0, 1, 1) == doctest::Approx(-2));
        CHECK(s.gamma(1, 0, 1) == doctest::Approx(0.5));
        CHECK(s.gamma(1, 1, 0) == doctest::Approx(0.5));
        CHECK(std::abs(s.gamma(0, 0, 0)) < 1e-12);
        CHECK(sys.unknowns() == 6);
    }

    TEST_CASE("metric compatibility") {
        const MatrixJet g(parse_matrix({{"1 + x^2", "x*y"}, {"x*y", "2 + y^2"}}, xy));
        const ConnectionSystem sys(&g, nullptr, 1e-8, 1e-7);
        const Eigen::VectorXd p = vec({0.4, -0.3});
        const Eigen::VectorXd nab = nabla_2tensor(g.value(p), g.grad(p), sys.solve(p).gamma);
        CHECK(nab.cwiseAbs().maxCoeff() < 1e-10);
        // same through the generic finite-difference covariant derivative
        TensorFn gt = [&](const Eigen::VectorXd& x) {
            const Eigen::MatrixXd m = g.value(x);
            return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(m.data(), m.size()));
        };
        CHECK(covariant_derivative(gt, 0, 2, sys.solve(p).gamma, p, 1e-4).cwiseAbs().maxCoeff() < 1e-7);
    }

    TEST_CASE("stationarity holds for a degenerate flat metric") {
        // 4(x dx + y dy)² away from the origin
        const ExprMatrix g = parse_matrix({{"4*x^2", "4*x*y"}, {"4*x*y", "4*y^2"}}, xy);
        const Grid grid({{1, 2}, {1, 2}}, 5);
        const auto st = stationarity_check(g, grid, 1e-7, 1e-8);
        CHECK(st.holds);
        CHECK(st.max_violation < 1e-12);
        const MatrixJet j(g);
        const auto sw = sweep_solvability(ConnectionSystem(&j, nullptr, 1e-8, 1e-7), grid);
        CHECK(sw.solvable_g);
        CHECK(sw.constant_rank);
    }

    TEST_CASE("stationarity fails for y² dx²") {
        // kernel ∂y; Γ_{xx,y} = −y
        const ExprMatrix g = parse_matrix({{"y^2", "0"}, {"0", "0"}}, xy);
        const Grid grid({{-1, 1}, {1, 2}}, 5);
        const auto st = stationarity_check(g, grid, 1e-7, 1e-8);
        CHECK_FALSE(st.holds);
        CHECK(st.max_violation == doctest::Approx(2));
        const MatrixJet j(g);
        const auto sw = sweep_solvability(ConnectionSystem(&j, nullptr, 1e-8, 1e-7), grid);
        CHECK_FALSE(sw.solvable_g);
    }

    TEST_CASE("skew system solvable exactly when closed") {
        const std::vector<std::string> xyz{"x", "y", "z"};
        const Grid grid({{-0.5, 0.5}, {-0.5, 0.5}, {-0.5, 0.5}}, 3);
        const MatrixJet closed(parse_matrix({{"0", "1 + x^2", "0"}, {"-(1 + x^2)", "0", "0"}, {"0", "0", "0"}}, xyz));
        CHECK(sweep_solvability(ConnectionSystem(nullptr, &closed, 1e-8, 1e-7), grid).solvable_w);
        const MatrixJet open(parse_matrix({{"0", "exp(z)", "0"}, {"-exp(z)", "0", "0"}, {"0", "0", "0"}}, xyz));
        const auto sw = sweep_solvability(ConnectionSystem(nullptr, &open, 1e-8, 1e-7), grid);
        CHECK_FALSE(sw.solvable_w);
        CHECK(sw.max_ratio_w > 10);
    }

    TEST_CASE("rotation is a Killing field of the plane") {
        const ExprMatrix e = parse_matrix({{"1", "0"}, {"0", "1"}}, xy);
        CHECK(lie_derivative_metric({parse("-y", xy), parse("x", xy)}, e).all_zero());
        const ExprMatrix l = lie_derivative_metric({parse("x", xy), parse("0", xy)}, e);
        CHECK(l(0, 0).value() == Rational(2));
    }

    TEST_CASE("unknown indexing is symmetric in the lower pair") {
        const MatrixJet g(parse_matrix({{"1", "0", "0"}, {"0", "1", "0"}, {"0", "0", "1"}}, {"a", "b", "c"}));
        const ConnectionSystem sys(&g, nullptr, 1e-8, 1e-7);
        CHECK(sys.unknown_index(2, 0, 1) == sys.unknown_index(2, 1, 0));
        CHECK(sys.unknown_index(0, 0, 0) != sys.unknown_index(1, 0, 0));
    }
}
