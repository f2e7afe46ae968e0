#include <algorithm>
#include <cmath>

#include "construct_internal.hpp"
#include "flatform/construct.hpp"
#include "flatform/skew.hpp"

namespace flatform {

TwoFormField TwoFormField::from(const MatrixJet& w) {
    auto jet = std::make_shared<const MatrixJet>(w);
    TwoFormField f;
    f.n = w.dim();
    f.value = [jet](const Eigen::VectorXd& x) { return jet->value(x); };
    f.grad = [jet](const Eigen::VectorXd& x) { return jet->grad(x); };
    return f;
}

Eigen::MatrixXd canonical_symplectic(int n) {
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i + 1 < n; i += 2) {
        J(i, i + 1) = 1;
        J(i + 1, i) = -1;
    }
    return J;
}

// Symplectic Gram–Schmidt over the standard basis: columns e₁, f₁, e₂, f₂, …
Eigen::MatrixXd symplectic_basis(const Eigen::MatrixXd& w0) {
    const int n = static_cast<int>(w0.rows());
    if (n % 2 != 0) throw ConstructionError("symplectic basis needs even dimension");
    auto om = [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return a.dot(w0 * b); };
    std::vector<Eigen::VectorXd> rest;
    for (int i = 0; i < n; ++i) rest.push_back(Eigen::VectorXd::Unit(n, i));
    Eigen::MatrixXd A(n, n);
    int col = 0;
    while (!rest.empty()) {
        Eigen::VectorXd e = rest.front();
        rest.erase(rest.begin());
        std::size_t best = 0;
        double bv = -1;
        for (std::size_t j = 0; j < rest.size(); ++j) {
            const double v = std::abs(om(e, rest[j]));
            if (v > bv) { bv = v; best = j; }
        }
        if (rest.empty() || bv <= 1e-14) throw ConstructionError("form is degenerate at the base point");
        Eigen::VectorXd f = rest[best] / om(e, rest[best]);
        rest.erase(rest.begin() + static_cast<std::ptrdiff_t>(best));
        for (auto& v : rest) v = v - om(v, f) * e + om(v, e) * f;
        A.col(col++) = e;
        A.col(col++) = f;
    }
    return A;
}

namespace {

// Moser flow of ω_t = ω₀ + tσ, σ = ω − ω₀, with X_t = ω_t^{-1}α and dα = σ.
class MoserFlow {
public:
    MoserFlow(const TwoFormField& w, Eigen::VectorXd base, Box allowed, const Tolerances& tol)
        : w_(w), base_(std::move(base)), allowed_(std::move(allowed)), tol_(tol), n_(w.n) {
        w0_ = w_.value(base_);
        gauss_legendre01(32, nodes_, weights_);
    }

    // α(x) = ∫₀¹ s σ(z_s)ᵀ(x−p̂) ds and Dα(j,k) = ∂_k α_j.
    void primitive(const Eigen::VectorXd& x, Eigen::VectorXd& alpha, Eigen::MatrixXd& dalpha) const {
        const Eigen::VectorXd v = x - base_;
        alpha = Eigen::VectorXd::Zero(n_);
        dalpha = Eigen::MatrixXd::Zero(n_, n_);
        for (std::size_t q = 0; q < nodes_.size(); ++q) {
            const double s = nodes_[q], wq = weights_[q];
            const Eigen::VectorXd z = base_ + s * v;
            const Eigen::MatrixXd sig = w_.value(z) - w0_;
            const auto ds = w_.grad(z);
            alpha += wq * s * sig.transpose() * v;
            for (int k = 0; k < n_; ++k) {
                // ∂_k α_j ∋ s σ_kj + s² Σ_i v^i ∂_kσ_ij
                dalpha.col(k) += wq * s * (sig.row(k).transpose() + s * ds[static_cast<std::size_t>(k)].transpose() * v);
            }
        }
    }

    // Flow from t=0 to 1 starting at x0; returns the end point and dx/dx0.
    void flow(const Eigen::VectorXd& x0, Eigen::VectorXd& x1, Eigen::MatrixXd& J) const {
        const int n = n_;
        OdeRhs rhs = [&](const OdeState& y, OdeState& dy, double t) {
            Eigen::Map<const Eigen::VectorXd> x(y.data(), n);
            Eigen::Map<const Eigen::MatrixXd> Jm(y.data() + n, n, n);
            if (!box_contains(allowed_, x)) throw detail::FlowFailure("Moser flow left the box");
            Eigen::VectorXd xv = x;
            Eigen::VectorXd alpha;
            Eigen::MatrixXd dalpha;
            primitive(xv, alpha, dalpha);
            const Eigen::MatrixXd sig = w_.value(xv) - w0_;
            const auto dw = w_.grad(xv);
            const Eigen::MatrixXd wt = w0_ + t * sig;
            Eigen::FullPivLU<Eigen::MatrixXd> lu(wt);
            Eigen::JacobiSVD<Eigen::MatrixXd> svd(wt);
            const auto& sv = svd.singularValues();
            if (!(sv[n - 1] > 0) || sv[0] / sv[n - 1] > tol_.omega_cond_max)
                throw detail::FlowFailure("interpolated form degenerate");
            const Eigen::VectorXd X = lu.solve(alpha);
            Eigen::MatrixXd DX(n, n);
            for (int k = 0; k < n; ++k) DX.col(k) = lu.solve(dalpha.col(k) - t * dw[static_cast<std::size_t>(k)] * X);
            dy.resize(y.size());
            Eigen::Map<Eigen::VectorXd>(dy.data(), n) = X;
            Eigen::Map<Eigen::MatrixXd>(dy.data() + n, n, n) = DX * Jm;
        };
        OdeState y(static_cast<std::size_t>(n + n * n), 0.0);
        Eigen::Map<Eigen::VectorXd>(y.data(), n) = x0;
        Eigen::Map<Eigen::MatrixXd>(y.data() + n, n, n).setIdentity();
        OdeState out = integrate(rhs, y, 0.0, 1.0, OdeOptions{tol_.ode_atol, tol_.ode_rtol});
        x1 = Eigen::Map<const Eigen::VectorXd>(out.data(), n);
        J = Eigen::Map<const Eigen::MatrixXd>(out.data() + n, n, n);
        if (!box_contains(allowed_, x1)) throw detail::FlowFailure("Moser flow left the box");
    }

private:
    TwoFormField w_;
    Eigen::VectorXd base_;
    Box allowed_;
    Tolerances tol_;
    int n_;
    Eigen::MatrixXd w0_;
    std::vector<double> nodes_, weights_;
};

double distance_to_boundary(const Box& box, const Eigen::VectorXd& p) {
    double d = INFINITY;
    for (std::size_t a = 0; a < box.size(); ++a)
        d = std::min({d, p[static_cast<Eigen::Index>(a)] - box[a].lo, box[a].hi - p[static_cast<Eigen::Index>(a)]});
    return d;
}

double form_closedness(const TwoFormField& w, const Grid& grid) {
    const int n = w.n;
    double worst = 0;
    for (const auto& p : grid.points()) {
        auto d = w.grad(p);
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j)
                for (int k = j + 1; k < n; ++k)
                    worst = std::max(worst, std::abs(d[static_cast<std::size_t>(k)](i, j) + d[static_cast<std::size_t>(i)](j, k) +
                                                     d[static_cast<std::size_t>(j)](k, i)));
    }
    return worst;
}

double form_scale(const TwoFormField& w, const Grid& grid) {
    double s = 1;
    for (const auto& p : grid.points()) s = std::max(s, w.value(p).cwiseAbs().maxCoeff());
    return s;
}

}  // namespace

FlatChartResult darboux_symplectic(const TwoFormField& w, const Box& box, const Eigen::VectorXd& base, const Tolerances& tol,
                                   int certify_grid) {
    const int n = w.n;
    if (n % 2 != 0) throw ConstructionError("symplectic form needs even dimension");
    const Eigen::MatrixXd w0 = w.value(base);
    try {
        invert_omega(w0, tol.omega_cond_max);
    } catch (const SingularOmega& e) {
        throw ConstructionError(std::string("ω degenerate at the base point: ") + e.what());
    }
    const Eigen::MatrixXd A = symplectic_basis(w0);
    const double dist = distance_to_boundary(box, base);
    if (!(dist > 0)) throw ConstructionError("base point lies on the box boundary");

    Grid agrid(box, default_grid_per_axis(n));
    const double scale = form_scale(w, agrid);
    const double closed = form_closedness(w, agrid);

    auto flow = std::make_shared<const MoserFlow>(w, base, inflate(box, 1.0), tol);
    double rho = 0.9 * dist / A.cwiseAbs().rowwise().sum().maxCoeff();
    FlatChartResult res;
    res.method = "moser";
    std::string last_error;
    for (int attempt = 0; attempt <= tol.max_box_shrink; ++attempt) {
        Box pbox(static_cast<std::size_t>(n));
        for (int a = 0; a < n; ++a) pbox[static_cast<std::size_t>(a)] = {base[a] - rho, base[a] + rho};
        ChartMap::Sampler s = detail::memoize([flow, A, base](const Eigen::VectorXd& z) {
            ChartMap::Sample out;
            out.y = z;
            Eigen::MatrixXd J;
            flow->flow(base + A * (z - base), out.x, J);
            out.dx_dy = J * A;
            return out;
        });
        try {
            ChartMap chart(ChartMap::Kind::Parametrization, pbox, base, s,
                           "Moser flow to ω(base), then linear symplectic normalization");
            chart.certify(certify_grid, tol.jac_min);
            VerifyResult vr = verify_flat_chart(w.value, chart, certify_grid);
            if (!(vr.max_deviation <= tol.tol_construct * scale))
                throw detail::FlowFailure("pullback deviation " + std::to_string(vr.max_deviation));
            res.chart = std::move(chart);
            res.C = vr.C;
            res.deviation = std::move(vr.deviation);
            res.max_deviation = vr.max_deviation;
            res.box_shrinks = attempt;
            break;
        } catch (const std::runtime_error& e) {
            last_error = e.what();
            if (attempt == tol.max_box_shrink)
                throw ConstructionError("Darboux construction failed after " + std::to_string(attempt) +
                                        " box shrinks: " + last_error);
            rho *= 0.5;
        }
    }
    res.certify_grid = certify_grid;
    res.diagnostics.push_back({"closedness", closed, tol.tol_closed * scale, closed <= tol.tol_closed * scale});
    res.diagnostics.push_back({"jacobian_min", res.chart.certificate(), tol.jac_min, true});
    if (res.box_shrinks > 0)
        res.notes.push_back("parameter box halved " + std::to_string(res.box_shrinks) + " time(s): " + last_error);
    return res;
}

FlatChartResult darboux_degenerate(const MatrixJet& w, const Box& box, const Eigen::VectorXd& base, const Tolerances& tol,
                                   int certify_grid) {
    const int n = w.dim();
    const Eigen::MatrixXd W0 = w.value(base);
    const int p = numeric_rank(W0, tol.sigma_tol);
    if (p == n) return darboux_symplectic(TwoFormField::from(w), box, base, tol, certify_grid);

    Grid agrid(box, default_grid_per_axis(n));
    for (const auto& x : agrid.points())
        if (numeric_rank(w.value(x), tol.sigma_tol) != p) throw ConstructionError("rank of ω is not constant on the box");

    KernelData kd;
    try {
        kd = kernel_basis(W0, tol.sigma_tol, tol.kernel_cond_max);
    } catch (const KernelPivotError& e) {
        throw ConstructionError(std::string("kernel pivot: ") + e.what());
    }
    const std::vector<int> piv = kd.pivot, free = kd.nonpivot;
    const int q = n - p;
    auto jet = std::make_shared<const MatrixJet>(w);

    // Kernel frame with V[π] = I: graph-type, so it commutes when ker ω is integrable.
    struct Frame {
        Eigen::MatrixXd V;                // n×q
        std::vector<Eigen::MatrixXd> dV;  // dV[k] = ∂_k V
    };
    auto frame = std::make_shared<std::function<Frame(const Eigen::VectorXd&)>>(
        [jet, piv, free, n, p, q](const Eigen::VectorXd& x) {
            const Eigen::MatrixXd W = jet->value(x);
            Eigen::MatrixXd Wn(n, p), Wp(n, q);
            for (int j = 0; j < p; ++j) Wn.col(j) = W.col(free[static_cast<std::size_t>(j)]);
            for (int j = 0; j < q; ++j) Wp.col(j) = W.col(piv[static_cast<std::size_t>(j)]);
            Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(Wn);
            Frame f;
            f.V = Eigen::MatrixXd::Zero(n, q);
            for (int j = 0; j < q; ++j) f.V(piv[static_cast<std::size_t>(j)], j) = 1;
            if (p > 0) {
                Eigen::MatrixXd Vn = cod.solve(-Wp);
                for (int j = 0; j < p; ++j) f.V.row(free[static_cast<std::size_t>(j)]) = Vn.row(j);
            }
            const auto dW = jet->grad(x);
            for (int k = 0; k < n; ++k) {
                Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, q);
                if (p > 0) {
                    Eigen::MatrixXd dn = cod.solve(-(dW[static_cast<std::size_t>(k)] * f.V));
                    for (int j = 0; j < p; ++j) d.row(free[static_cast<std::size_t>(j)]) = dn.row(j);
                }
                f.dV.push_back(std::move(d));
            }
            return f;
        });

    // Frobenius and invariance checks: [V_a, V_b] = 0 and ι_V dω = 0.
    double commute = 0, lie = 0;
    for (const auto& x : agrid.points()) {
        Frame f = (*frame)(x);
        auto dw = jet->grad(x);
        for (int a = 0; a < q; ++a)
            for (int b = a + 1; b < q; ++b) {
                Eigen::VectorXd br = Eigen::VectorXd::Zero(n);
                for (int k = 0; k < n; ++k)
                    br += f.V(k, a) * f.dV[static_cast<std::size_t>(k)].col(b) - f.V(k, b) * f.dV[static_cast<std::size_t>(k)].col(a);
                commute = std::max(commute, br.cwiseAbs().maxCoeff());
            }
        for (int a = 0; a < q; ++a)
            for (int j = 0; j < n; ++j)
                for (int k = 0; k < n; ++k) {
                    double v = 0;
                    for (int i = 0; i < n; ++i)
                        v += f.V(i, a) * (dw[static_cast<std::size_t>(i)](j, k) + dw[static_cast<std::size_t>(j)](k, i) +
                                          dw[static_cast<std::size_t>(k)](i, j));
                    lie = std::max(lie, std::abs(v));
                }
    }
    if (commute > tol.tol_commute)
        throw ConstructionError("kernel frame does not commute (defect " + std::to_string(commute) + ")");
    if (lie > tol.tol_commute)
        throw ConstructionError("ω is not invariant along its kernel (defect " + std::to_string(lie) + ")");

    // Reduced symplectic form on the slice x_π = base_π.
    FlatChartResult inner;
    Box rbox;
    Eigen::VectorXd rbase(p);
    for (int j = 0; j < p; ++j) {
        rbox.push_back(box[static_cast<std::size_t>(free[static_cast<std::size_t>(j)])]);
        rbase[j] = base[free[static_cast<std::size_t>(j)]];
    }
    auto embed = [base, free, p](const Eigen::VectorXd& s) {
        Eigen::VectorXd x = base;
        for (int j = 0; j < p; ++j) x[free[static_cast<std::size_t>(j)]] = s[j];
        return x;
    };
    const bool has_reduced = p > 0;
    if (has_reduced) {
        TwoFormField red;
        red.n = p;
        red.value = [jet, embed, free, p](const Eigen::VectorXd& s) {
            const Eigen::MatrixXd W = jet->value(embed(s));
            Eigen::MatrixXd r(p, p);
            for (int i = 0; i < p; ++i)
                for (int j = 0; j < p; ++j) r(i, j) = W(free[static_cast<std::size_t>(i)], free[static_cast<std::size_t>(j)]);
            return r;
        };
        red.grad = [jet, embed, free, p](const Eigen::VectorXd& s) {
            const auto dW = jet->grad(embed(s));
            std::vector<Eigen::MatrixXd> out;
            for (int k = 0; k < p; ++k) {
                const auto& d = dW[static_cast<std::size_t>(free[static_cast<std::size_t>(k)])];
                Eigen::MatrixXd r(p, p);
                for (int i = 0; i < p; ++i)
                    for (int j = 0; j < p; ++j) r(i, j) = d(free[static_cast<std::size_t>(i)], free[static_cast<std::size_t>(j)]);
                out.push_back(std::move(r));
            }
            return out;
        };
        inner = darboux_symplectic(red, rbox, rbase, tol, certify_grid);
    }
    auto inner_chart = std::make_shared<const ChartMap>(inner.chart);

    const Box allowed = inflate(box, 1.0);
    const OdeOptions opt{tol.ode_atol, tol.ode_rtol};
    double rscale = 1.0;
    FlatChartResult res;
    res.method = "darboux-kernel";
    std::string last_error;
    for (int attempt = 0; attempt <= tol.max_box_shrink; ++attempt) {
        Box pbox;
        Eigen::VectorXd pbase(n);
        for (int j = 0; j < p; ++j) {
            pbox.push_back(inner_chart->domain()[static_cast<std::size_t>(j)]);
            pbase[j] = inner_chart->domain_base()[j];
        }
        for (int a = 0; a < q; ++a) {
            const auto& iv = box[static_cast<std::size_t>(piv[static_cast<std::size_t>(a)])];
            const double c = base[piv[static_cast<std::size_t>(a)]];
            pbox.push_back({rscale * (iv.lo - c), rscale * (iv.hi - c)});
            pbase[p + a] = 0;
        }
        ChartMap::Sampler s = detail::memoize([=](const Eigen::VectorXd& y) {
            Eigen::VectorXd x0 = base;
            Eigen::MatrixXd K0 = Eigen::MatrixXd::Zero(n, p);
            if (p > 0) {
                ChartMap::Sample in = inner_chart->sample(y.head(p));
                x0 = embed(in.x);
                for (int j = 0; j < p; ++j) K0.row(free[static_cast<std::size_t>(j)]) = in.dx_dy.row(j);
            }
            const Eigen::VectorXd r = y.tail(q);
            // Flow of Σ r_a V_a for unit time, with the variation of the slice directions.
            OdeRhs rhs = [&](const OdeState& st, OdeState& ds, double) {
                Eigen::Map<const Eigen::VectorXd> x(st.data(), n);
                Eigen::Map<const Eigen::MatrixXd> K(st.data() + n, n, p);
                if (!box_contains(allowed, x)) throw detail::FlowFailure("kernel flow left the box");
                Frame f = (*frame)(x);
                Eigen::MatrixXd DW(n, n);
                for (int k = 0; k < n; ++k) DW.col(k) = f.dV[static_cast<std::size_t>(k)] * r;
                ds.resize(st.size());
                Eigen::Map<Eigen::VectorXd>(ds.data(), n) = f.V * r;
                if (p > 0) Eigen::Map<Eigen::MatrixXd>(ds.data() + n, n, p) = DW * K;
            };
            OdeState st(static_cast<std::size_t>(n + n * p));
            Eigen::Map<Eigen::VectorXd>(st.data(), n) = x0;
            if (p > 0) Eigen::Map<Eigen::MatrixXd>(st.data() + n, n, p) = K0;
            OdeState e = r.size() > 0 && r.cwiseAbs().maxCoeff() > 0 ? integrate(rhs, st, 0.0, 1.0, opt) : st;
            ChartMap::Sample out;
            out.y = y;
            out.x = Eigen::Map<const Eigen::VectorXd>(e.data(), n);
            if (!box_contains(allowed, out.x)) throw detail::FlowFailure("kernel flow left the box");
            out.dx_dy.resize(n, n);
            if (p > 0) out.dx_dy.leftCols(p) = Eigen::Map<const Eigen::MatrixXd>(e.data() + n, n, p);
            out.dx_dy.rightCols(q) = (*frame)(out.x).V;
            return out;
        });
        try {
            ChartMap chart(ChartMap::Kind::Parametrization, pbox, pbase, s,
                           "reduced Darboux chart on the slice, then flows of the kernel frame");
            chart.certify(certify_grid, tol.jac_min);
            VerifyResult vr = verify_flat_chart(CompiledMatrix(w.expr()), chart, certify_grid);
            res.chart = std::move(chart);
            res.C = vr.C;
            res.deviation = std::move(vr.deviation);
            res.max_deviation = vr.max_deviation;
            res.box_shrinks = inner.box_shrinks + attempt;
            break;
        } catch (const std::runtime_error& e) {
            last_error = e.what();
            if (attempt == tol.max_box_shrink)
                throw ConstructionError("kernel rectification failed after " + std::to_string(attempt) +
                                        " box shrinks: " + last_error);
            rscale *= 0.5;
        }
    }
    res.certify_grid = certify_grid;
    res.diagnostics.push_back({"kernel_commutator", commute, tol.tol_commute, true});
    res.diagnostics.push_back({"kernel_invariance", lie, tol.tol_commute, true});
    for (const auto& d : inner.diagnostics) res.diagnostics.push_back({"reduced_" + d.name, d.value, d.tol, d.pass});
    for (const auto& note : inner.notes) res.notes.push_back("reduced form: " + note);
    if (!last_error.empty()) res.notes.push_back("kernel box shrunk: " + last_error);
    return res;
}

}  // namespace flatform
