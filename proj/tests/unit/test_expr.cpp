#include <doctest.h>

#include <cmath>

#include "flatform/chart.hpp"
#include "flatform/expr.hpp"
#include "flatform/rational.hpp"

using namespace flatform;

TEST_SUITE("rational") {
    TEST_CASE("normalizes sign and common factors") {
        Rational r(6, -4);
        CHECK(r.num() == -3);
        CHECK(r.den() == 2);
        CHECK(Rational(0, -5) == Rational(0));
        CHECK_THROWS_AS(Rational(1, 0), std::domain_error);
    }

    TEST_CASE("field operations are exact") {
        const Rational a(1, 3), b(1, 6);
        CHECK(a + b == Rational(1, 2));
        CHECK(a - b == Rational(1, 6));
        CHECK(a * b == Rational(1, 18));
        CHECK(a / b == Rational(2));
        CHECK(Rational(2, 3).pow(-2) == Rational(9, 4));
        CHECK(Rational(-1, 2).pow(3) == Rational(-1, 8));
    }

    TEST_CASE("decimal parsing") {
        CHECK(Rational::from_decimal("0.25") == Rational(1, 4));
        CHECK(Rational::from_decimal("-3") == Rational(-3));
        CHECK(Rational::from_decimal("1e-3") == Rational(1, 1000));
        CHECK(Rational::from_decimal("2.5E+2") == Rational(250));
        CHECK_THROWS_AS(Rational::from_decimal("1.2.3"), std::invalid_argument);
        CHECK_THROWS_AS(Rational::from_decimal(""), std::invalid_argument);
    }

    TEST_CASE("overflow is reported, not wrapped") {
        const Rational big(INT64_C(1) << 62);
        CHECK_THROWS(big * big);
        CHECK_THROWS(big + big);
    }
}

TEST_SUITE("expr") {
    const std::vector<std::string> xy{"x", "y"};

    double at(const std::string& s, double x, double y) {
        const double v[2] = {x, y};
        return evaluate(parse(s, xy), v);
    }

    TEST_CASE("precedence and associativity") {
        CHECK(at("1 + 2*3", 0, 0) == doctest::Approx(7));
        CHECK(at("2^3^2", 0, 0) == doctest::Approx(512));
        CHECK(at("-x^2", 3, 0) == doctest::Approx(-9));
        CHECK(at("(x - y)/(x + y)", 3, 1) == doctest::Approx(0.5));
        CHECK(at("x*y - y/x", 2, 4) == doctest::Approx(6));
    }

    TEST_CASE("elementary functions") {
        CHECK(at("sin(x)^2 + cos(x)^2", 0.7, 0) == doctest::Approx(1));
        CHECK(at("exp(ln(x))", 2.5, 0) == doctest::Approx(2.5));
        CHECK(at("sqrt(x*x + y*y)", 3, 4) == doctest::Approx(5));
    }

    TEST_CASE("constant folding keeps rationals exact") {
        Expr e = parse("1/3 + 1/6", xy);
        REQUIRE(e.is_const());
        CHECK(e.value() == Rational(1, 2));
        CHECK(parse("0*x + 1*y", xy).op() == Op::Var);
        CHECK(parse("x - x", xy).is_zero());
    }

    TEST_CASE("derivatives match finite differences") {
        const char* cases[] = {"x^3*y - 2*x*y^2", "sin(x*y)", "exp(x)*cos(y)", "ln(1 + x^2 + y^2)",
                               "sqrt(2 + x*y)", "x/(1 + y^2)", "(1 + x^2)^(-2)"};
        for (const char* s : cases) {
            CAPTURE(s);
            const Expr e = parse(s, xy);
            for (int v = 0; v < 2; ++v) {
                const Expr d = e.diff(v);
                double p[2] = {0.3, -0.7}, q[2] = {0.3, -0.7};
                const double h = 1e-6;
                p[v] += h;
                q[v] -= h;
                const double fd = (evaluate(e, p) - evaluate(e, q)) / (2 * h);
                const double at0[2] = {0.3, -0.7};
                CHECK(evaluate(d, at0) == doctest::Approx(fd).epsilon(1e-7));
            }
        }
    }

    TEST_CASE("differentiate by name and substitution") {
        const Expr d = differentiate(parse("x^2*y", xy), "x", xy);
        CHECK(structurally_equal(d, parse("2*x*y", xy)));
        const Expr s = parse("x*y", xy).substitute({parse("y + 1", xy), parse("2", xy)});
        const double v[2] = {3, 0};
        CHECK(evaluate(s, v) == doctest::Approx(2 * 0 + 2));
    }

    TEST_CASE("printing round-trips") {
        const char* cases[] = {"x^2 - 3*x*y + 1/2", "sin(x)/(1 + y^2)", "-(x - y)^3", "exp(-x)*sqrt(y)"};
        for (const char* s : cases) {
            CAPTURE(s);
            const Expr e = parse(s, xy);
            const Expr back = parse(to_string(e, xy), xy);
            const double v[2] = {0.4, 1.3};
            CHECK(evaluate(back, v) == doctest::Approx(evaluate(e, v)));
        }
    }

    TEST_CASE("compiled evaluation agrees with the tree") {
        const Expr e = parse("x^3 - sin(x*y)/(2 + cos(y)) + exp(-y^2)", xy);
        const CompiledExpr c(e);
        for (double x : {-1.0, 0.0, 0.5})
            for (double y : {-0.3, 0.9}) {
                const double v[2] = {x, y};
                CHECK(c(v) == doctest::Approx(evaluate(e, v)).epsilon(1e-14));
            }
    }

    TEST_CASE("parse errors carry offsets") {
        CHECK_THROWS_AS(parse("x + ", xy), ParseError);
        CHECK_THROWS_AS(parse("x + q", xy), ParseError);
        CHECK_THROWS_AS(parse("sin x", xy), ParseError);
        CHECK_THROWS_AS(parse("(x + y", xy), ParseError);
        try {
            parse("x * $", xy);
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(e.offset() == 4);
        }
    }

    TEST_CASE("domain violations name the sub-expression") {
        const double v[2] = {-1, 0};
        CHECK_THROWS_AS(evaluate(parse("ln(x)", xy), v), EvalError);
        CHECK_THROWS_AS(evaluate(parse("sqrt(x)", xy), v), EvalError);
        CHECK_THROWS_AS(evaluate(parse("1/y", xy), v), EvalError);
        const CompiledExpr c(parse("1 + ln(x)", xy));
        CHECK_THROWS_AS(c(v), EvalError);
    }

    TEST_CASE("dependency queries") {
        const Expr e = parse("x^2 + 3", xy);
        CHECK(e.depends_on(0));
        CHECK_FALSE(e.depends_on(1));
        CHECK(e.max_var() == 0);
        CHECK(parse("4", xy).max_var() == -1);
    }
}
