#include "flatform/curvature.hpp"

#include <algorithm>
#include <cmath>

namespace flatform {

double Riemann::max_abs() const {
    double m = 0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

Riemann lowered_curvature(const MatrixFn& g, const GammaFn& gamma, const Eigen::VectorXd& x, double h, int richardson) {
    const int n = static_cast<int>(x.size());
    const std::size_t n3 = static_cast<std::size_t>(n * n * n);
    Christoffel G = gamma(x);
    Eigen::MatrixXd gx = g(x);
    // dG[k][(s*n+j)*n+l] = ∂_k Γ^s_jl
    std::vector<std::vector<double>> dG(static_cast<std::size_t>(n), std::vector<double>(n3));
    for (int k = 0; k < n; ++k) {
        std::vector<std::vector<double>> table;
        double step = h;
        for (int m = 0; m <= richardson; ++m, step *= 0.5) {
            Eigen::VectorXd a = x, b = x;
            a[k] += step;
            b[k] -= step;
            Christoffel ga = gamma(a), gb = gamma(b);
            std::vector<double> d(n3);
            for (std::size_t t = 0; t < n3; ++t) d[t] = (ga.v[t] - gb.v[t]) / (2 * step);
            table.push_back(std::move(d));
        }
        // Richardson: eliminate h², h⁴, … in turn
        double factor = 4.0;
        for (int level = 1; level <= richardson; ++level, factor *= 4.0) {
            for (int m = richardson; m >= level; --m)
                for (std::size_t t = 0; t < n3; ++t)
                    table[m][t] = (factor * table[m][t] - table[m - 1][t]) / (factor - 1.0);
        }
        dG[static_cast<std::size_t>(k)] = table.back();
    }
    auto d = [&](int k, int s, int j, int l) { return dG[static_cast<std::size_t>(k)][static_cast<std::size_t>((s * n + j) * n + l)]; };
    Riemann R(n);
    std::vector<double> inner(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
            for (int l = k + 1; l < n; ++l) {
                for (int s = 0; s < n; ++s) {
                    double v = d(k, s, j, l) - d(l, s, j, k);
                    for (int a = 0; a < n; ++a) v += G(s, k, a) * G(a, l, j) - G(s, l, a) * G(a, j, k);
                    inner[static_cast<std::size_t>(s)] = v;
                }
                for (int i = 0; i < n; ++i) {
                    double r = 0;
                    for (int s = 0; s < n; ++s) r += gx(i, s) * inner[static_cast<std::size_t>(s)];
                    R(i, j, k, l) = r;
                    R(i, j, l, k) = -r;
                }
            }
    return R;
}

const char* to_string(Outcome o) {
    switch (o) {
        case Outcome::Pass: return "pass";
        case Outcome::Fail: return "fail";
        case Outcome::Margin: return "margin";
        case Outcome::Skipped: return "skipped";
    }
    return "?";
}

const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::Flat: return "FLAT";
        case Verdict::NotFlat: return "NOT_FLAT";
        case Verdict::Inconclusive: return "INCONCLUSIVE";
    }
    return "?";
}

const char* to_string(Reason r) {
    switch (r) {
        case Reason::None: return "";
        case Reason::NonConstantRank: return "non-constant rank";
        case Reason::ToleranceMargin: return "tolerance margin";
    }
    return "?";
}

Outcome classify(double value, double tol, double margin) {
    if (!std::isfinite(value)) return Outcome::Fail;
    if (value <= tol) return Outcome::Pass;
    if (value >= margin * tol) return Outcome::Fail;
    return Outcome::Margin;
}

const Condition* FlatnessReport::find(const std::string& name) const {
    for (const auto& c : conditions)
        if (c.name == name) return &c;
    return nullptr;
}

namespace {

bool is_rank_row(const Condition& c) { return c.name.rfind("constant_rank", 0) == 0 || c.name == "system_rank_constant"; }

}  // namespace

void FlatnessReport::decide() {
    reason = Reason::None;
    for (const auto& c : conditions)
        if (c.decisive && is_rank_row(c) && c.outcome == Outcome::Fail) {
            verdict = Verdict::Inconclusive;
            reason = Reason::NonConstantRank;
            return;
        }
    bool margin = false;
    for (const auto& c : conditions) {
        if (!c.decisive) continue;
        if (c.outcome == Outcome::Fail) {
            verdict = Verdict::NotFlat;
            return;
        }
        if (c.outcome == Outcome::Margin) margin = true;
    }
    if (margin) {
        verdict = Verdict::Inconclusive;
        reason = Reason::ToleranceMargin;
    } else {
        verdict = Verdict::Flat;
    }
}

double form_scale(const MatrixFn& b, const Grid& grid) {
    double m = 1.0;
    for (const auto& p : grid.points()) m = std::max(m, b(p).cwiseAbs().maxCoeff());
    return m;
}

double curvature_sweep(const MatrixFn& g, const GammaFn& gamma, const Grid& grid, double h, int richardson) {
    double worst = 0;
    for (const auto& p : grid.points()) worst = std::max(worst, lowered_curvature(g, gamma, p, h, richardson).max_abs());
    return worst;
}

namespace {

Condition rank_row(const std::string& name, const std::vector<int>& ranks) {
    auto [lo, hi] = std::minmax_element(ranks.begin(), ranks.end());
    Condition c{name, static_cast<double>(*hi - *lo), 0.0, Outcome::Pass, true, ""};
    c.outcome = *hi == *lo ? Outcome::Pass : Outcome::Fail;
    c.note = "rank " + (*hi == *lo ? std::to_string(*lo) : std::to_string(*lo) + ".." + std::to_string(*hi));
    return c;
}

double grid_max_abs(const MatrixFn& f, const Grid& grid) {
    double m = 0;
    for (const auto& p : grid.points()) m = std::max(m, f(p).cwiseAbs().maxCoeff());
    return m;
}

}  // namespace

FlatnessReport flatness_verdict(const MatrixJet* g, const MatrixJet* w, const Grid& grid, const Tolerances& tol) {
    const int n = grid.dim();
    FlatnessReport rep;
    rep.grid_per_axis = grid.per_axis();
    MatrixFn zero = [n](const Eigen::VectorXd&) { return Eigen::MatrixXd::Zero(n, n).eval(); };
    MatrixFn gf = g ? MatrixFn([g](const Eigen::VectorXd& x) { return g->value(x); }) : zero;
    MatrixFn wf = w ? MatrixFn([w](const Eigen::VectorXd& x) { return w->value(x); }) : zero;
    rep.scale = form_scale([&](const Eigen::VectorXd& x) { return Eigen::MatrixXd(gf(x) + wf(x)); }, grid);
    const bool g_zero = !g || g->is_zero() || grid_max_abs(gf, grid) <= 1e-14 * rep.scale;
    const bool w_zero = !w || w->is_zero() || grid_max_abs(wf, grid) <= 1e-14 * rep.scale;
    rep.ranks = rank_profile(gf, wf, grid, tol.sigma_tol);

    if (g_zero && w_zero) {
        rep.checks = "trivial";
        rep.verdict = Verdict::Flat;
        return rep;
    }
    rep.checks = w_zero ? "symmetric" : (g_zero ? "skew" : "joint");
    if (!g_zero) rep.conditions.push_back(rank_row("constant_rank_g", rep.ranks.rank_g));
    if (!w_zero) rep.conditions.push_back(rank_row("constant_rank_w", rep.ranks.rank_w));
    if (!g_zero && !w_zero) rep.conditions.push_back(rank_row("constant_rank_intersection", rep.ranks.rank_intersection));
    rep.decide();
    if (rep.reason == Reason::NonConstantRank) return rep;

    const double margin = tol.margin;
    if (!g_zero) {
        auto st = stationarity_check(g->expr(), grid, tol.tol_stat * rep.scale, tol.sigma_tol);
        rep.conditions.push_back({"stationarity", st.max_violation, tol.tol_stat * rep.scale,
                                  classify(st.max_violation, tol.tol_stat * rep.scale, margin), true, ""});
    }
    if (!w_zero) {
        double d = closedness_residual(w->expr(), grid);
        rep.conditions.push_back({"closedness", d, tol.tol_closed * rep.scale, classify(d, tol.tol_closed * rep.scale, margin),
                                  true, "max |dω|"});
    }
    ConnectionSystem sys(g_zero ? nullptr : g, w_zero ? nullptr : w, tol.sigma_tol, tol.tol_lin);
    auto sw = sweep_solvability(sys, grid);
    const std::string note = "max residual / (tol_lin·(1+‖rhs‖))";
    if (!g_zero && w_zero) {
        rep.conditions.push_back({"g_solvable", sw.max_ratio_g, 1.0, classify(sw.max_ratio_g, 1.0, margin), true, note});
    } else if (g_zero) {
        rep.conditions.push_back({"w_solvable", sw.max_ratio_w, 1.0, classify(sw.max_ratio_w, 1.0, margin), false, note});
    } else {
        double r = std::max(sw.max_ratio_g, sw.max_ratio_w);
        rep.conditions.push_back({"joint_solvable", r, 1.0, classify(r, 1.0, margin), true, note});
    }
    Condition sr = rank_row("system_rank_constant", sw.ranks);
    sr.decisive = !g_zero;
    rep.conditions.push_back(sr);
    rep.decide();
    if (g_zero || rep.verdict == Verdict::NotFlat || rep.reason == Reason::NonConstantRank) {
        if (!g_zero) rep.conditions.push_back({"curvature", 0.0, tol.tol_flat * rep.scale, Outcome::Skipped, true, "system infeasible"});
        return rep;
    }
    const double h = tol.h_curv * grid.diameter();
    rep.max_curvature = curvature_sweep(gf, sys.gamma_fn(), grid, h, tol.richardson);
    rep.conditions.push_back({"curvature", rep.max_curvature, tol.tol_flat * rep.scale,
                              classify(rep.max_curvature, tol.tol_flat * rep.scale, margin), true, "max |R_ijkl|"});
    rep.decide();
    return rep;
}

double constant_curvature_residual(const MatrixFn& g, const GammaFn& gamma, double kappa, const Grid& grid, double h) {
    double worst = 0;
    for (const auto& p : grid.points()) {
        Riemann R = lowered_curvature(g, gamma, p, h);
        Eigen::MatrixXd G = g(p);
        const int n = R.n;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                for (int k = 0; k < n; ++k)
                    for (int l = 0; l < n; ++l)
                        worst = std::max(worst, std::abs(R(i, j, k, l) - kappa * (G(i, k) * G(j, l) - G(i, l) * G(j, k))));
    }
    return worst;
}

double symmetric_space_residual(const MatrixFn& g, const GammaFn& gamma, const Grid& grid, double h, double h_outer) {
    TensorFn rfield = [&](const Eigen::VectorXd& x) {
        Riemann R = lowered_curvature(g, gamma, x, h);
        return Eigen::Map<const Eigen::VectorXd>(R.v.data(), static_cast<Eigen::Index>(R.v.size())).eval();
    };
    double worst = 0;
    for (const auto& p : grid.points()) {
        Eigen::VectorXd d = covariant_derivative(rfield, 0, 4, gamma(p), p, h_outer);
        worst = std::max(worst, d.cwiseAbs().maxCoeff());
    }
    return worst;
}

}  // namespace flatform
