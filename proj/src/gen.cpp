#include "flatform/gen.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

namespace flatform {

Poly Poly::constant(int nvars, Rational c) {
    Poly p(nvars);
    p.add(Monomial(static_cast<std::size_t>(nvars), 0), c);
    return p;
}

Poly Poly::variable(int nvars, int i) {
    Monomial m(static_cast<std::size_t>(nvars), 0);
    m[static_cast<std::size_t>(i)] = 1;
    return monomial(Rational(1), m);
}

Poly Poly::monomial(Rational c, Monomial m) {
    Poly p(static_cast<int>(m.size()));
    p.add(m, c);
    return p;
}

void Poly::add(const Monomial& m, const Rational& c) {
    if (c.is_zero()) return;
    auto it = terms_.find(m);
    if (it == terms_.end()) {
        terms_.emplace(m, c);
        return;
    }
    it->second = it->second + c;
    if (it->second.is_zero()) terms_.erase(it);
}

int Poly::degree() const {
    int d = 0;
    for (const auto& [m, c] : terms_) {
        int s = 0;
        for (int e : m) s += e;
        d = std::max(d, s);
    }
    return d;
}

Poly Poly::operator+(const Poly& o) const {
    Poly r = *this;
    for (const auto& [m, c] : o.terms_) r.add(m, c);
    return r;
}

Poly Poly::operator-(const Poly& o) const { return *this + o * Rational(-1); }

Poly Poly::operator*(const Poly& o) const {
    Poly r(n_);
    for (const auto& [m1, c1] : terms_)
        for (const auto& [m2, c2] : o.terms_) {
            Monomial m = m1;
            for (std::size_t i = 0; i < m.size(); ++i) m[i] += m2[i];
            r.add(m, c1 * c2);
        }
    return r;
}

Poly Poly::operator*(const Rational& c) const {
    Poly r(n_);
    for (const auto& [m, v] : terms_) r.add(m, v * c);
    return r;
}

Poly Poly::diff(int i) const {
    Poly r(n_);
    for (const auto& [m, c] : terms_) {
        const int e = m[static_cast<std::size_t>(i)];
        if (e == 0) continue;
        Monomial d = m;
        --d[static_cast<std::size_t>(i)];
        r.add(d, c * Rational(e));
    }
    return r;
}

double Poly::eval(const Eigen::VectorXd& x) const {
    double s = 0;
    for (const auto& [m, c] : terms_) {
        double t = c.to_double();
        for (std::size_t i = 0; i < m.size(); ++i) t *= std::pow(x[static_cast<Eigen::Index>(i)], m[i]);
        s += t;
    }
    return s;
}

std::string Poly::str(const std::vector<std::string>& names) const {
    if (terms_.empty()) return "0";
    std::ostringstream os;
    bool first = true;
    // Highest degree first reads more naturally.
    std::vector<std::pair<Monomial, Rational>> ts(terms_.begin(), terms_.end());
    std::stable_sort(ts.begin(), ts.end(), [](const auto& a, const auto& b) {
        int da = 0, db = 0;
        for (int e : a.first) da += e;
        for (int e : b.first) db += e;
        return da > db;
    });
    for (const auto& [m, c] : ts) {
        Rational a = c.is_negative() ? -c : c;
        os << (first ? (c.is_negative() ? "-" : "") : (c.is_negative() ? " - " : " + "));
        first = false;
        std::vector<std::string> factors;
        for (std::size_t i = 0; i < m.size(); ++i) {
            if (m[i] == 0) continue;
            factors.push_back(m[i] == 1 ? names[i] : names[i] + "^" + std::to_string(m[i]));
        }
        if (!a.is_one() || factors.empty()) factors.insert(factors.begin(), a.str());
        for (std::size_t k = 0; k < factors.size(); ++k) os << (k ? "*" : "") << factors[k];
    }
    return os.str();
}

namespace {

std::vector<std::string> default_names(int n) {
    static const std::vector<std::string> small{"x", "y", "z", "w"};
    std::vector<std::string> out;
    for (int i = 0; i < n; ++i) out.push_back(n <= 4 ? small[static_cast<std::size_t>(i)] : "x" + std::to_string(i + 1));
    return out;
}

using RMat = std::vector<std::vector<Rational>>;

RMat zeros(int n) { return RMat(static_cast<std::size_t>(n), std::vector<Rational>(static_cast<std::size_t>(n), Rational(0))); }

RMat congruence(const RMat& D, const RMat& S) {  // Sᵀ D S
    const int n = static_cast<int>(D.size());
    RMat out = zeros(n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            Rational v(0);
            for (int a = 0; a < n; ++a)
                for (int b = 0; b < n; ++b) {
                    const auto& d = D[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
                    if (!d.is_zero()) v = v + S[static_cast<std::size_t>(a)][static_cast<std::size_t>(i)] * d * S[static_cast<std::size_t>(b)][static_cast<std::size_t>(j)];
                }
            out[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = v;
        }
    return out;
}

// Unit triangular with entries in {−1, 0, 1}.
RMat unit_triangular(int n, bool upper, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> pick(-1, 1);
    RMat S = zeros(n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            if (i == j) S[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = Rational(1);
            else if ((upper && j > i) || (!upper && j < i)) S[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = Rational(pick(rng));
        }
    return S;
}

}  // namespace

Fixture generate(const GenOptions& opt) {
    const int n = opt.n;
    if (n < 1 || n > 8) throw std::invalid_argument("dimension must be between 1 and 8");
    if (opt.rank_g < 0 || opt.rank_g > n) throw std::invalid_argument("rank_g must be between 0 and n");
    if (opt.rank_w < 0 || opt.rank_w > n || opt.rank_w % 2 != 0) throw std::invalid_argument("rank_w must be even and at most n");
    if (!(opt.deform >= 0) || opt.deform > 1) throw std::invalid_argument("deformation must lie in [0, 1]");

    std::mt19937_64 rng(opt.seed);
    std::uniform_int_distribution<int> coin(0, 1);

    RMat Dg = zeros(n), Dw = zeros(n);
    for (int i = 0; i < opt.rank_g; ++i) Dg[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)] = Rational(coin(rng) ? 1 : -1);
    for (int i = 0; i + 1 < opt.rank_w; i += 2) {
        Dw[static_cast<std::size_t>(i)][static_cast<std::size_t>(i + 1)] = Rational(1);
        Dw[static_cast<std::size_t>(i + 1)][static_cast<std::size_t>(i)] = Rational(-1);
    }
    const RMat Cg = congruence(Dg, unit_triangular(n, true, rng));
    const RMat Cw = congruence(Dw, unit_triangular(n, false, rng));

    const int K = static_cast<int>(std::floor(16 * opt.deform + 1e-12));
    std::uniform_int_distribution<int> coef(-K, K), var(0, n - 1), deg(2, 3), nterms(1, 2);
    const auto names = default_names(n);
    Box box(static_cast<std::size_t>(n), Interval{-0.5, 0.5});
    Chart chart(names, box);
    const Grid check(box, 5);

    for (int attempt = 1; attempt <= 100; ++attempt) {
        std::vector<Poly> y;
        for (int i = 0; i < n; ++i) {
            Poly p = Poly::variable(n, i);
            if (K > 0) {
                const int t = nterms(rng);
                for (int k = 0; k < t; ++k) {
                    Poly::Monomial m(static_cast<std::size_t>(n), 0);
                    const int d = deg(rng);
                    for (int e = 0; e < d; ++e) ++m[static_cast<std::size_t>(var(rng))];
                    int c = 0;
                    while (c == 0) c = coef(rng);
                    p = p + Poly::monomial(Rational(c, 16), m);
                }
            }
            y.push_back(std::move(p));
        }
        std::vector<std::vector<Poly>> J(static_cast<std::size_t>(n));
        for (int a = 0; a < n; ++a)
            for (int i = 0; i < n; ++i) J[static_cast<std::size_t>(a)].push_back(y[static_cast<std::size_t>(a)].diff(i));

        double jmin = INFINITY;
        for (const auto& p : check.points()) {
            Eigen::MatrixXd Jn(n, n);
            for (int a = 0; a < n; ++a)
                for (int i = 0; i < n; ++i) Jn(a, i) = J[static_cast<std::size_t>(a)][static_cast<std::size_t>(i)].eval(p);
            jmin = std::min(jmin, std::abs(Jn.determinant()));
        }
        if (!(jmin >= 0.2)) continue;

        // B_ij = Σ_ab J_ai C_ab J_bj
        std::vector<std::vector<std::string>> rows(static_cast<std::size_t>(n));
        Fixture fx;
        fx.C.resize(n, n);
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b)
                fx.C(a, b) = (Cg[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] + Cw[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)]).to_double();
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                Poly s(n);
                for (int a = 0; a < n; ++a)
                    for (int b = 0; b < n; ++b) {
                        const Rational c = Cg[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] + Cw[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
                        if (c.is_zero()) continue;
                        s = s + J[static_cast<std::size_t>(a)][static_cast<std::size_t>(i)] * J[static_cast<std::size_t>(b)][static_cast<std::size_t>(j)] * c;
                    }
                rows[static_cast<std::size_t>(i)].push_back(s.str(names));
            }
        fx.problem = make_problem(chart, rows);
        for (const auto& p : y) fx.chart.push_back(p.str(names));
        fx.attempts = attempt;
        return fx;
    }
    throw std::runtime_error("generated map not invertible on the box after 100 retries");
}

std::string chart_to_yaml(const std::vector<std::string>& exprs) {
    YAML::Emitter out;
    out << YAML::BeginMap;
    out << YAML::Key << "schema" << YAML::Value << "flatform-chart/1";
    out << YAML::Key << "kind" << YAML::Value << "coordinates";
    out << YAML::Key << "map" << YAML::Value << YAML::Flow << exprs;
    out << YAML::EndMap;
    return std::string(out.c_str()) + "\n";
}

}  // namespace flatform
