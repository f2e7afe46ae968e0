#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "flatform/problem.hpp"
#include "flatform/rational.hpp"

namespace flatform {

// Sparse polynomial with rational coefficients.
class Poly {
public:
    using Monomial = std::vector<int>;

    explicit Poly(int nvars = 0) : n_(nvars) {}
    static Poly constant(int nvars, Rational c);
    static Poly variable(int nvars, int i);
    static Poly monomial(Rational c, Monomial m);

    int nvars() const { return n_; }
    bool is_zero() const { return terms_.empty(); }
    const std::map<Monomial, Rational>& terms() const { return terms_; }
    int degree() const;

    Poly operator+(const Poly& o) const;
    Poly operator-(const Poly& o) const;
    Poly operator*(const Poly& o) const;
    Poly operator*(const Rational& c) const;
    Poly diff(int i) const;
    double eval(const Eigen::VectorXd& x) const;
    std::string str(const std::vector<std::string>& names) const;

private:
    int n_;
    std::map<Monomial, Rational> terms_;
    void add(const Monomial& m, const Rational& c);
};

struct GenOptions {
    std::uint64_t seed = 1;
    int n = 2;
    int rank_g = 2;
    int rank_w = 0;
    double deform = 0.1;
};

// B = Jᵀ C J for y = x + (sparse cubic perturbation); y is a flat chart.
struct Fixture {
    Problem problem;
    std::vector<std::string> chart;  // y_i(x)
    Eigen::MatrixXd C;
    int attempts = 1;
};

Fixture generate(const GenOptions& opt);
std::string chart_to_yaml(const std::vector<std::string>& exprs);

}  // namespace flatform
