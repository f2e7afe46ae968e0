#include "flatform/analyze.hpp"

#include <algorithm>
#include <cmath>

#include "flatform/skew.hpp"

namespace flatform {

const char* to_string(Case c) {
    switch (c) {
        case Case::Trivial: return "trivial";
        case Case::Symmetric: return "symmetric";
        case Case::Skew: return "skew";
        case Case::SymmetricPlusSymplectic: return "symmetric+symplectic";
        case Case::General: return "general";
    }
    return "?";
}

namespace {

double grid_max(const CompiledMatrix& m, const Grid& grid) {
    double v = 0;
    for (const auto& p : grid.points()) v = std::max(v, m(p).cwiseAbs().maxCoeff());
    return v;
}

struct Profile {
    bool g_zero, w_zero;
    double scale;
    std::vector<int> rank_w;
};

Profile profile(const Problem& p, const Grid& grid) {
    CompiledMatrix b(p.form), g(p.g), w(p.w);
    Profile pr;
    pr.scale = std::max(1.0, grid_max(b, grid));
    pr.g_zero = p.g.all_zero() || grid_max(g, grid) <= 1e-14 * pr.scale;
    pr.w_zero = p.w.all_zero() || grid_max(w, grid) <= 1e-14 * pr.scale;
    if (!pr.w_zero)
        for (const auto& x : grid.points()) pr.rank_w.push_back(numeric_rank(w(x), p.tol.sigma_tol));
    return pr;
}

bool full_rank_everywhere(const std::vector<int>& r, int n) {
    return !r.empty() && std::all_of(r.begin(), r.end(), [n](int v) { return v == n; });
}

}  // namespace

Case classify_case(const Problem& p) {
    Grid grid(p.chart.box(), p.grid_per_axis());
    Profile pr = profile(p, grid);
    if (pr.g_zero && pr.w_zero) return Case::Trivial;
    if (pr.w_zero) return Case::Symmetric;
    if (pr.g_zero) return Case::Skew;
    if (full_rank_everywhere(pr.rank_w, p.dim())) return Case::SymmetricPlusSymplectic;
    return Case::General;
}

Analysis analyze(const Problem& p) {
    const Grid grid(p.chart.box(), p.grid_per_axis());
    const Tolerances& tol = p.tol;
    Analysis a;
    a.which = classify_case(p);
    MatrixJet gj(p.g), wj(p.w);
    const bool has_g = a.which != Case::Skew && a.which != Case::Trivial;
    const bool has_w = a.which != Case::Symmetric && a.which != Case::Trivial;
    if (a.which != Case::SymmetricPlusSymplectic) {
        a.report = flatness_verdict(has_g ? &gj : nullptr, has_w ? &wj : nullptr, grid, tol);
        return a;
    }

    // g + symplectic ω: the symmetric conditions for g, dω = 0 and ∇(ω) compatible with g.
    FlatnessReport rep = flatness_verdict(&gj, nullptr, grid, tol);
    rep.checks = "symmetric+symplectic";
    const MatrixFn bf = [&](const Eigen::VectorXd& x) { return Eigen::MatrixXd(gj.value(x) + wj.value(x)); };
    const double scale = form_scale(bf, grid);
    rep.scale = std::max(rep.scale, scale);
    {
        RankProfile rp = rank_profile([&](const Eigen::VectorXd& x) { return gj.value(x); },
                                      [&](const Eigen::VectorXd& x) { return wj.value(x); }, grid, tol.sigma_tol);
        rep.ranks = rp;
        const auto mm = std::minmax_element(rp.rank_w.begin(), rp.rank_w.end());
        rep.conditions.insert(rep.conditions.begin() + 1,
                              Condition{"constant_rank_w", static_cast<double>(*mm.second - *mm.first), 0.0,
                                        rp.constant_w ? Outcome::Pass : Outcome::Fail, true, "rank spread over grid"});
    }
    const double margin = tol.margin;
    const double d = closedness_residual(p.w, grid);
    rep.conditions.push_back({"closedness", d, tol.tol_closed * scale, classify(d, tol.tol_closed * scale, margin), true,
                              "max |dω|"});
    const double tpar = tol.tol_parallel * scale;
    ConnectionSystem gsys(&gj, nullptr, tol.sigma_tol, tol.tol_lin);
    auto add_guarded = [&](const std::string& name, bool decisive, const std::string& note, auto&& fn) {
        try {
            const double v = fn();
            rep.conditions.push_back({name, v, tpar, classify(v, tpar, margin), decisive, note});
        } catch (const SingularOmega& e) {
            rep.conditions.push_back({name, INFINITY, tpar, Outcome::Margin, decisive, e.what()});
        }
    };
    add_guarded("parallel1", true, "max |g P ∇ω P g|", [&] {
        return parallel1_residual(gj, wj, gsys.gamma_fn(), grid, tol.omega_cond_max);
    });
    add_guarded("parallelPg", false, "dual form with P = ω⁻¹", [&] {
        return parallelPg_residual(gj, wj, grid, tol.omega_cond_max);
    });
    try {
        const double j = jacobi_residual_dual(wj, grid, tol.omega_cond_max);
        rep.conditions.push_back({"jacobi", j, tol.tol_jacobi * scale, classify(j, tol.tol_jacobi * scale, margin), false,
                                  "Jacobi identity of P = ω⁻¹"});
    } catch (const SingularOmega& e) {
        rep.conditions.push_back({"jacobi", INFINITY, tol.tol_jacobi * scale, Outcome::Margin, false, e.what()});
    }
    ConnectionSystem jsys(&gj, &wj, tol.sigma_tol, tol.tol_lin);
    auto sw = sweep_solvability(jsys, grid);
    const double jr = std::max(sw.max_ratio_g, sw.max_ratio_w);
    rep.conditions.push_back({"joint_solvable", jr, 1.0, classify(jr, 1.0, margin), false,
                              "max residual / (tol_lin·(1+‖rhs‖))"});
    rep.decide();
    a.report = std::move(rep);
    return a;
}

int default_certify_grid(const Problem& p, Case c) {
    if (p.certify_grid > 0) return p.certify_grid;
    if (c == Case::Symmetric) return 9;
    return default_grid_per_axis(p.dim());
}

FlatChartResult construct(const Problem& p) {
    const Case c = classify_case(p);
    const int cg = default_certify_grid(p, c);
    const Box& box = p.chart.box();
    const Eigen::VectorXd& base = p.chart.base();
    switch (c) {
        case Case::Trivial: {
            std::vector<Expr> id;
            for (int i = 0; i < p.dim(); ++i) id.push_back(Expr::var(i));
            FlatChartResult r;
            r.method = "identity";
            r.chart = ChartMap::coordinates(p.chart, id, "identity (form vanishes)");
            r.chart.certify(cg, p.tol.jac_min);
            VerifyResult vr = verify_flat_chart(CompiledMatrix(p.form), r.chart, cg);
            r.C = vr.C;
            r.deviation = vr.deviation;
            r.max_deviation = vr.max_deviation;
            r.certify_grid = cg;
            return r;
        }
        case Case::Symmetric: return flat_chart_symmetric(MatrixJet(p.g), p.chart, p.tol, cg);
        case Case::Skew: return darboux_degenerate(MatrixJet(p.w), box, base, p.tol, cg);
        case Case::SymmetricPlusSymplectic: return joint_flat_chart(MatrixJet(p.g), MatrixJet(p.w), box, base, p.tol, cg);
        case Case::General: break;
    }
    throw UnsupportedCase("unsupported case: g ≠ 0 with ω neither zero nor symplectic");
}

VerifyOutcome verify(const Problem& p, const ChartFile& cf) {
    VerifyOutcome out;
    CompiledMatrix b(p.form);
    const Grid agrid(p.chart.box(), p.grid_per_axis());
    out.tol = p.tol.tol_construct * form_scale([&](const Eigen::VectorXd& x) { return b(x); }, agrid);
    if (cf.kind == "sampled") {
        auto at = [&](const ChartFile::Sample& s) { return pullback(b(s.x), s.dx_dy); };
        out.result.C = at(cf.samples.front());
        double jmin = INFINITY;
        for (const auto& s : cf.samples) {
            const double d = (at(s) - out.result.C).cwiseAbs().maxCoeff();
            out.result.deviation.push_back(d);
            out.result.max_deviation = std::max(out.result.max_deviation, d);
            jmin = std::min(jmin, std::abs(s.dx_dy.determinant()));
        }
        out.jacobian_min = jmin;
        out.invertible = jmin >= p.tol.jac_min;
    } else {
        const int per_axis = p.certify_grid > 0 ? p.certify_grid : 9;
        ChartMap map = cf.map;
        try {
            out.jacobian_min = map.certify(per_axis, p.tol.jac_min);
        } catch (const std::runtime_error& e) {
            out.invertible = false;
            out.jacobian_min = map.certificate();
            out.message = e.what();
        }
        try {
            out.result = verify_flat_chart(b, map, per_axis);
        } catch (const std::runtime_error& e) {
            out.invertible = false;
            out.result.max_deviation = INFINITY;
            if (out.message.empty()) out.message = e.what();
        }
    }
    out.pass = out.invertible && out.result.max_deviation <= out.tol;
    if (out.message.empty())
        out.message = out.pass ? "pullback constant within tolerance"
                               : (out.invertible ? "pullback not constant" : "chart map not invertible");
    return out;
}

}  // namespace flatform
