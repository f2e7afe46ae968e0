// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "flatform/analyze.hpp"
#include "flatform/gen.hpp"
#include "flatform/skew.hpp"

using namespace flatform;

namespace {

std::string data(const std::string& name) { return std::string(FLATFORM_TEST_DATA) + "/" + name; }

struct Line {
    bool pass = true;
    std::ostringstream detail;
    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << " [failed: " << what << "]";
        }
    }
};

int failures = 0;

void run(int id, const char* title, const std::function<void(Line&)>& body) {
    Line line;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        body(line);
    } catch (const std::exception& e) {
        line.pass = false;
        line.detail << " [exception: " << e.what() << "]";
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!line.pass) ++failures;
    std::printf("criterion %d: %s  %s —%s (%.1fs)\n", id, line.pass ? "PASS" : "FAIL", title, line.detail.str().c_str(), secs);
    std::fflush(stdout);
}

const Condition* row(const FlatnessReport& r, const std::string& name) { return r.find(name); }

std::vector<GenOptions> roundtrip_fixtures() {
    std::vector<std::array<int, 3>> combos;
    for (int n = 2; n <= 4; ++n)
        for (int rg = 0; rg <= n; ++rg)
            for (int rw = 0; rw <= n; rw += 2) combos.push_back({n, rg, rw});
    std::vector<GenOptions> out;
    for (int i = 0; i < 100; ++i) {
        const auto& c = combos[static_cast<std::size_t>(i) % combos.size()];
        GenOptions o;
        o.seed = 1000 + static_cast<std::uint64_t>(i);
        o.n = c[0];
        o.rank_g = c[1];
        o.rank_w = c[2];
        o.deform = 0.05 + 0.05 * (i % 4);  // 0.05 … 0.2
        out.push_back(o);
    }
    return out;
}

std::string chart_yaml(const std::vector<std::string>& exprs) {
    std::string s = "map: [";
    for (std::size_t i = 0; i < exprs.size(); ++i) s += (i ? ", \"" : "\"") + exprs[i] + "\"";
    return s + "]\n";
}

// Degenerate, curved metric: g = Jᵀ D(y) J with D = diag(1, 1 + y₁²/2, 1…, 0…) and y
// a generated polynomial chart. Kernel directions are ∂/∂y_a for a ≥ rank.
ExprMatrix warped_metric(const Fixture& fx, int rank) {
    const auto& names = fx.problem.chart.names();
    const int n = static_cast<int>(names.size());
    std::vector<Expr> y;
    for (const auto& s : fx.chart) y.push_back(parse(s, names));
    std::vector<Expr> D(static_cast<std::size_t>(n), Expr(0));
    for (int a = 0; a < rank; ++a) D[static_cast<std::size_t>(a)] = Expr(1);
    D[1] = Expr(1) + y[0] * y[0] * Expr(Rational(1, 2));
    ExprMatrix g(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            std::vector<Expr> terms;
            for (int a = 0; a < rank; ++a)
                terms.push_back(D[static_cast<std::size_t>(a)] * y[static_cast<std::size_t>(a)].diff(i) * y[static_cast<std::size_t>(a)].diff(j));
            g(i, j) = make_sum(terms);
        }
    return g;
}

}  // namespace

int main() {
    const Tolerances tol;

    run(1, "roundtrip soundness on 100 generated fixtures", [](Line& L) {
        const auto t0 = std::chrono::steady_clock::now();
        int flat = 0, verified = 0;
        double worst = 0;
        for (const auto& o : roundtrip_fixtures()) {
            const Fixture fx = generate(o);
            const Analysis a = analyze(fx.problem);
            worst = std::max(worst, a.report.max_curvature);
            if (a.report.verdict == Verdict::Flat && a.report.max_curvature <= 1e-5) ++flat;
            else L.detail << " [n=" << o.n << " rg=" << o.rank_g << " rw=" << o.rank_w << " seed=" << o.seed << " → "
                          << to_string(a.report.verdict) << "]";
            const VerifyOutcome v = verify(fx.problem, parse_chart_file(chart_yaml(fx.chart), fx.problem));
            if (v.pass) ++verified;
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        L.detail << " FLAT " << flat << "/100, max curvature " << worst << ", known charts verified " << verified
                 << "/100, " << secs << " s";
        L.require(flat == 100, "all FLAT with curvature ≤ 1e-5");
        L.require(verified == 100, "ground-truth charts verify");
        L.require(secs <= 300, "runtime ≤ 5 min");
    });

    run(2, "negative detection", [&](Line& L) {
        const Problem sphere = load_problem(data("sphere.yaml"));
        const Analysis s = analyze(sphere);
        L.require(s.report.verdict == Verdict::NotFlat, "sphere NOT_FLAT");
        MatrixJet gj(sphere.g);
        ConnectionSystem sys(&gj, nullptr, tol.sigma_tol, tol.tol_lin);
        auto gf = [&](const Eigen::VectorXd& x) { return gj.value(x); };
        const double h = tol.h_curv * sphere.chart.diameter();
        std::mt19937_64 rng(7);
        std::uniform_real_distribution<double> th(0.5, 1.5), ph(0, 1);
        double err = 0;
        for (int k = 0; k < 20; ++k) {
            Eigen::VectorXd p(2);
            p << th(rng), ph(rng);
            const Riemann R = lowered_curvature(gf, sys.gamma_fn(), p, h, tol.richardson);
            err = std::max(err, std::abs(R(0, 1, 0, 1) - std::pow(std::sin(p[0]), 2)));
        }
        L.detail << " sphere " << to_string(s.report.verdict) << ", max |R_1212 − sin²θ| " << err << " at 20 points;";
        L.require(err <= 1e-5, "R_1212 = sin²θ within 1e-5");

        const Analysis y2 = analyze(load_problem(data("y2dx2.yaml")));
        const Condition* st = row(y2.report, "stationarity");
        L.detail << " y²dx² " << to_string(y2.report.verdict) << " stationarity " << (st ? st->value : NAN) << ";";
        L.require(st && st->outcome == Outcome::Fail, "y²dx² stationarity violation");
        L.require(y2.report.verdict == Verdict::NotFlat, "y²dx² NOT_FLAT");

        const Analysis w = analyze(load_problem(data("xdxdy.yaml")));
        L.detail << " x dx∧dy " << to_string(w.report.verdict) << " (" << to_string(w.report.reason) << ")";
        L.require(w.report.verdict == Verdict::Inconclusive && w.report.reason == Reason::NonConstantRank,
                  "x dx∧dy INCONCLUSIVE by rank");
    });

    run(3, "rank-one example 4(x dx + y dy)²", [](Line& L) {
        const Analysis o = analyze(load_problem(data("radial_rank1_origin.yaml")));
        L.require(o.report.verdict == Verdict::Inconclusive && o.report.reason == Reason::NonConstantRank,
                  "origin box: non-constant rank");
        const Problem p = load_problem(data("radial_rank1.yaml"));
        const Analysis a = analyze(p);
        L.require(a.report.verdict == Verdict::Flat, "[1,2]² FLAT");
        const FlatChartResult r = construct(p);
        L.require(r.m == 1, "m = 1");
        // affine fit f ≈ α(x²+y²) + β over the certification grid
        const Grid grid(p.chart.box(), r.certify_grid);
        Eigen::MatrixXd A(static_cast<Eigen::Index>(grid.size()), 2);
        Eigen::VectorXd f(static_cast<Eigen::Index>(grid.size()));
        for (std::size_t i = 0; i < grid.size(); ++i) {
            A(static_cast<Eigen::Index>(i), 0) = grid[i].squaredNorm();
            A(static_cast<Eigen::Index>(i), 1) = 1;
            f[static_cast<Eigen::Index>(i)] = r.f_values[i][0];
        }
        const Eigen::Vector2d ab = A.colPivHouseholderQr().solve(f);
        const double res = (A * ab - f).cwiseAbs().maxCoeff();
        L.detail << " origin " << to_string(o.report.verdict) << " (" << to_string(o.report.reason) << "); [1,2]² "
                 << to_string(a.report.verdict) << ", m=" << r.m << ", f = " << ab[0] << "(x²+y²) + " << ab[1]
                 << ", fit residual " << res;
        L.require(res <= 1e-5, "affine fit residual ≤ 1e-5");
        L.require(std::abs(ab[0]) > 0.1, "non-degenerate fit");
    });

    run(4, "g = dx², ω = (1+x²) dx∧dy", [](Line& L) {
        const Problem p = load_problem(data("line_area.yaml"));
        const Analysis a = analyze(p);
        const Condition* p1 = row(a.report, "parallel1");
        const Condition* pg = row(a.report, "parallelPg");
        L.require(p1 && pg, "parallel rows present");
        if (!p1 || !pg) return;
        L.detail << " parallel1 " << p1->value << ", parallelPg " << pg->value << ";";
        L.require(p1->value <= 1e-7 && pg->value <= 1e-7, "residuals ≤ 1e-7");
        L.require(p1->outcome == pg->outcome, "verdicts agree");
        L.require(a.report.verdict == Verdict::Flat, "FLAT");
        const FlatChartResult r = construct(p);
        L.detail << " construct (" << r.method << ") deviation " << r.max_deviation << ";";
        L.require(r.max_deviation <= 1e-5, "construct deviation ≤ 1e-5");
        const VerifyOutcome v = verify(p, load_chart_file(data("line_area_chart.yaml"), p));
        L.detail << " verify (x, y(1+x²)) deviation " << v.result.max_deviation;
        L.require(v.pass, "verify passes");
    });

    run(5, "8×8 Poisson normal form inverts to the expected zero pattern", [](Line& L) {
        const double P56 = 1, P57 = 2, P58 = 3, P67 = 4, P68 = 5, P78 = 6;
        Eigen::MatrixXd P(8, 8);
        P << 0, -1, 0, 0, 0, 0, 0, 0,
             1, 0, 0, 0, 0, 0, 0, 0,
             0, 0, 0, 0, -1, 0, 0, 0,
             0, 0, 0, 0, 0, -1, 0, 0,
             0, 0, 1, 0, 0, P56, P57, P58,
             0, 0, 0, 1, -P56, 0, P67, P68,
             0, 0, 0, 0, -P57, -P67, 0, P78,
             0, 0, 0, 0, -P58, -P68, -P78, 0;
        const Eigen::MatrixXd w = invert_omega(P);
        // nonzero slots of the expected ω (upper triangle, 0-based)
        const std::vector<std::pair<int, int>> allowed{{0, 1}, {2, 3}, {2, 4}, {2, 6}, {2, 7}, {3, 5}, {3, 6}, {3, 7}, {6, 7}};
        auto is_allowed = [&](int i, int j) {
            for (auto [a, b] : allowed)
                if ((a == i && b == j) || (a == j && b == i)) return true;
            return false;
        };
        double worst = 0;
        for (int i = 0; i < 8; ++i)
            for (int j = 0; j < 8; ++j)
                if (!is_allowed(i, j)) worst = std::max(worst, std::abs(w(i, j)));
        const double unit = std::max({std::abs(w(0, 1) - 1), std::abs(w(2, 4) - 1), std::abs(w(3, 5) - 1)});
        const double inv = (P * w - Eigen::MatrixXd::Identity(8, 8)).cwiseAbs().maxCoeff();
        L.detail << " max |ω_ij| off pattern " << worst << ", unit entries off by " << unit << ", |Pω − I| " << inv;
        L.require(worst < 1e-9, "zeros < 1e-9");
        L.require(unit < 1e-9, "unit entries");
    });

    run(6, "freedom invariance of R on 20 degenerate fixtures", [&](Line& L) {
        std::mt19937_64 rng(17);
        std::normal_distribution<double> N(0, 1);
        double worst = 0, rmax = 0, vmax = 0;
        int count = 0;
        const std::vector<std::array<int, 2>> shapes{{3, 2}, {4, 2}, {4, 3}};
        for (int k = 0; k < 20; ++k) {
            const auto [n, rank] = shapes[static_cast<std::size_t>(k) % shapes.size()];
            GenOptions o;
            o.seed = 500 + static_cast<std::uint64_t>(k);
            o.n = n;
            o.rank_g = rank;
            o.deform = 0.15;
            const Fixture fx = generate(o);
            const MatrixJet gj(warped_metric(fx, rank));
            const ConnectionSystem sys(&gj, nullptr, tol.sigma_tol, tol.tol_lin);
            const GammaFn gamma = sys.gamma_fn();
            const Eigen::VectorXd c = Eigen::VectorXd::NullaryExpr(n, [&] { return N(rng); });
            Eigen::MatrixXd T = Eigen::MatrixXd::NullaryExpr(n, n, [&] { return N(rng); });
            T = (T + T.transpose()).eval();
            // v = Π_ker(g) c is a smooth kernel field regardless of basis choice
            GammaFn shifted = [&, c, T](const Eigen::VectorXd& x) {
                Christoffel G = gamma(x);
                const Eigen::MatrixXd B = null_space(gj.value(x), tol.sigma_tol);
                const Eigen::VectorXd v = B * (B.transpose() * c);
                vmax = std::max(vmax, v.norm());
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < n; ++j)
                        for (int l = 0; l < n; ++l) G(i, j, l) += v[i] * T(j, l);
                return G;
            };
            auto gf = [&](const Eigen::VectorXd& x) { return gj.value(x); };
            const Grid grid(fx.problem.chart.box(), 3);
            const double h = tol.h_curv * grid.diameter();
            for (const auto& p : grid.points()) {
                const Riemann a = lowered_curvature(gf, gamma, p, h, tol.richardson);
                const Riemann b = lowered_curvature(gf, shifted, p, h, tol.richardson);
                rmax = std::max(rmax, a.max_abs());
                for (std::size_t q = 0; q < a.v.size(); ++q) worst = std::max(worst, std::abs(a.v[q] - b.v[q]));
            }
            ++count;
        }
        L.detail << " " << count << " fixtures, max |R| " << rmax << ", max |v| " << vmax << ", max |ΔR| " << worst;
        L.require(worst <= 1e-5, "ΔR ≤ 1e-5");
        L.require(rmax > 1e-2, "curvature is nontrivial");
    });

    run(7, "Darboux charts", [&](Line& L) {
        const Problem p = load_problem(data("darboux4.yaml"));
        const FlatChartResult r = construct(p);
        L.detail << " ω₀ + 0.1 z dx∧dz: " << r.method << " deviation " << r.max_deviation << ", det min "
                 << r.chart.certificate() << ";";
        L.require(r.max_deviation <= 1e-5, "perturbed form certifies ≤ 1e-5");
        const Problem c = load_problem(data("canonical4.yaml"));
        const FlatChartResult id = construct(c);
        double off = 0;
        const Grid grid(id.chart.domain(), 5);
        for (const auto& q : grid.points()) {
            const auto s = id.chart.sample(q);
            off = std::max({off, (s.x - q).cwiseAbs().maxCoeff(),
                            (s.dx_dy - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff()});
        }
        L.detail << " canonical ω₀: max |φ − id|, |Dφ − I| " << off;
        L.require(off <= 1e-9, "identity within 1e-9");
    });

    run(8, "stationarity ⟺ g-solvability, dω = 0 ⟺ skew-solvability", [&](Line& L) {
        std::vector<Problem> sym, skew;
        for (const char* f : {"polar.yaml", "sphere.yaml", "radial_rank1.yaml", "y2dx2.yaml", "warped_kernel.yaml",
                              "nonstationary3.yaml"})
            sym.push_back(load_problem(data(f)));
        for (const char* f : {"darboux4.yaml", "canonical4.yaml", "nonclosed3.yaml", "nonclosed4.yaml"})
            skew.push_back(load_problem(data(f)));
        for (const auto& o : roundtrip_fixtures()) {
            if (o.seed % 3) continue;
            const Fixture fx = generate(o);
            if (o.rank_g > 0) sym.push_back(make_problem(fx.problem.chart, fx.problem.rows));
            if (o.rank_w > 0) skew.push_back(fx.problem);
            // (1 + 0.3x)·B: generically breaks stationarity (degenerate g) and closedness (n ≥ 3)
            auto rows = fx.problem.rows;
            for (auto& r : rows)
                for (auto& e : r) e = "(1 + 3/10*" + fx.problem.chart.names()[0] + ")*(" + e + ")";
            const Problem scaled = make_problem(fx.problem.chart, rows);
            if (o.rank_g > 0 && o.rank_w == 0) sym.push_back(scaled);
            if (o.rank_g == 0 && o.rank_w > 0) skew.push_back(scaled);
        }
        int pairs = 0, splits = 0, negatives = 0;
        auto compare = [&](const FlatnessReport& rep, const char* a, const char* b) {
            const Condition* x = row(rep, a);
            const Condition* y = row(rep, b);
            if (!x || !y) return;
            ++pairs;
            if (x->outcome == Outcome::Fail) ++negatives;
            const bool split = (x->outcome == Outcome::Pass && y->outcome == Outcome::Fail) ||
                               (x->outcome == Outcome::Fail && y->outcome == Outcome::Pass);
            if (split) {
                ++splits;
                L.detail << " [split " << a << "=" << x->value << " " << b << "=" << y->value << "]";
            }
        };
        for (const auto& p : sym) {
            const MatrixJet g(p.g);
            compare(flatness_verdict(&g, nullptr, Grid(p.chart.box(), p.grid_per_axis()), p.tol), "stationarity", "g_solvable");
        }
        for (const auto& p : skew) {
            const MatrixJet w(p.w);
            compare(flatness_verdict(nullptr, &w, Grid(p.chart.box(), p.grid_per_axis()), p.tol), "closedness", "w_solvable");
        }
        L.detail << " " << pairs << " fixture comparisons (" << negatives << " negative), " << splits << " split";
        L.require(splits == 0, "no split verdicts");
        L.require(negatives >= 10, "both sides exercised");
    });

    run(9, "Pfaffian integrity on flat fixtures", [&](Line& L) {
        std::vector<std::pair<MatrixJet, Chart>> cases;
        for (const char* f : {"polar.yaml", "radial_rank1.yaml", "line_area.yaml"}) {
            const Problem p = load_problem(data(f));
            cases.emplace_back(MatrixJet(p.g), p.chart);
        }
        for (const auto& o : roundtrip_fixtures()) {
            if (o.rank_g == 0) continue;
            const Fixture fx = generate(o);
            cases.emplace_back(MatrixJet(fx.problem.g), fx.problem.chart);
        }
        double loop = 0, reorder = 0, zero = 0;
        for (const auto& [g, chart] : cases) {
            const FlatChartResult r = flat_chart_symmetric(g, chart, tol, 3);
            for (const auto& d : r.diagnostics) {
                if (d.name == "loop_defect") loop = std::max(loop, d.value);
                if (d.name == "reorder_defect") reorder = std::max(reorder, d.value);
                if (d.name == "zero_propagation") zero = std::max(zero, d.value);
            }
        }
        L.detail << " " << cases.size() << " fixtures, loop " << loop << ", reorder " << reorder << ", zero propagation " << zero;
        L.require(loop <= 1e-6, "loop ≤ 1e-6");
        L.require(reorder <= 1e-6, "reorder ≤ 1e-6");
        L.require(zero <= 1e-9, "zero propagation ≤ 1e-9");
    });

    std::printf("%s: %d criteria failed\n", failures ? "FAIL" : "PASS", failures);
    return failures ? 1 : 0;
}
