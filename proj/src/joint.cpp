#include <algorithm>
#include <cmath>

#include "construct_internal.hpp"
#include "flatform/construct.hpp"
#include "flatform/skew.hpp"

namespace flatform {

namespace {

using detail::FlowFailure;

// Level ℓ coordinates are (τ_1..τ_k, s_1..s_{n−k}); ∂τ_a is the Hamiltonian
// field of a function whose brackets with the others are constant, and the
// s are original coordinates `axes` on a slice through the base point.
struct Level {
    int k = 0;
    std::vector<int> axes;
    int c = -1;        // ℓ ≥ 2: new function = coordinate c of level ℓ−1
    int removed = -1;  // ℓ ≥ 2: position (in the previous axes) of the dropped slice axis
};

struct Ctx {
    Eigen::VectorXd x;
    Eigen::MatrixXd U;  // rows: df^a at x
    Eigen::MatrixXd W, P;
    std::vector<Eigen::MatrixXd> dW;
    Christoffel G;
};

struct Form {
    Eigen::MatrixXd O;
    std::vector<Eigen::MatrixXd> dO;  // along the level's slice axes
};

class JointBuilder {
public:
    JointBuilder(const MatrixJet& g, const MatrixJet& w, Eigen::VectorXd base, Box allowed, const Tolerances& tol)
        : w_(w), base_(std::move(base)), allowed_(std::move(allowed)), tol_(tol), n_(w.dim()) {
        fc_ = detail::flat_covectors(g, base_, tol);
        m_ = fc_.m;
    }

    int m() const { return m_; }
    const detail::FlatCovectors& covectors() const { return fc_; }
    const std::vector<Level>& levels() const { return levels_; }

    Ctx context(const Eigen::VectorXd& x, const Eigen::MatrixXd& ufree) const {
        if (!box_contains(allowed_, x)) throw FlowFailure("flow left the box");
        Ctx c;
        c.x = x;
        c.U = fc_.transport->complete(x, ufree);
        c.W = w_.value(x);
        c.dW = w_.grad(x);
        try {
            c.P = invert_omega(c.W, tol_.omega_cond_max);
        } catch (const SingularOmega& e) {
            throw FlowFailure(e.what());
        }
        c.G = fc_.transport->gamma(x);
        return c;
    }

    Eigen::MatrixXd free_at(const Eigen::VectorXd& x) const { return fc_.transport->free_part(fc_.pc->value(x).u); }

    // ∂_k X_f (all f at once, columns) with ∂P = −P ∂ω P and ∂u from the transport.
    Eigen::MatrixXd dX(const Ctx& c, int k) const {
        const Eigen::MatrixXd dU = CovectorTransport::rate(c.G, c.U, Eigen::VectorXd::Unit(n_, k));
        return c.P * c.dW[static_cast<std::size_t>(k)] * c.P * c.U.transpose() - c.P * dU.transpose();
    }

    Form form(std::size_t level, const Ctx& c) const {
        const Level& L = levels_[level];
        Form f;
        if (level == 0) {
            Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n_, n_);
            M.leftCols(m_) = -c.P * c.U.transpose();
            for (std::size_t j = 0; j < L.axes.size(); ++j) M(L.axes[j], m_ + static_cast<int>(j)) = 1;
            f.O = M.transpose() * c.W * M;
            for (int a : L.axes) {
                Eigen::MatrixXd dM = Eigen::MatrixXd::Zero(n_, n_);
                dM.leftCols(m_) = dX(c, a);
                const auto& dw = c.dW[static_cast<std::size_t>(a)];
                f.dO.push_back(dM.transpose() * c.W * M + M.transpose() * dw * M + M.transpose() * c.W * dM);
            }
            return f;
        }
        const Level& Lp = levels_[level - 1];
        Form fp = form(level - 1, c);
        Eigen::VectorXd Y;
        std::vector<Eigen::VectorXd> dY;
        field(Lp, L, fp, Y, dY);
        Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n_, n_);
        for (int j = 0; j < Lp.k; ++j) M(j, j) = 1;
        M.col(Lp.k) = Y;
        std::vector<int> keep = kept(Lp, L);
        for (std::size_t j = 0; j < keep.size(); ++j) M(Lp.k + keep[j], L.k + static_cast<int>(j)) = 1;
        f.O = M.transpose() * fp.O * M;
        for (int pj : keep) {
            Eigen::MatrixXd dM = Eigen::MatrixXd::Zero(n_, n_);
            dM.col(Lp.k) = dY[static_cast<std::size_t>(pj)];
            f.dO.push_back(dM.transpose() * fp.O * M + M.transpose() * fp.dO[static_cast<std::size_t>(pj)] * M +
                           M.transpose() * fp.O * dM);
        }
        return f;
    }

    // Hamiltonian field of coordinate L.c in level Lp coordinates, and its
    // derivatives along the slice axes of Lp.
    void field(const Level& Lp, const Level& L, const Form& fp, Eigen::VectorXd& Y, std::vector<Eigen::VectorXd>& dY) const {
        (void)Lp;
        Eigen::MatrixXd P = invert_form(fp.O);
        const Eigen::VectorXd e = Eigen::VectorXd::Unit(n_, L.c);
        Y = -P * e;
        dY.clear();
        for (const auto& d : fp.dO) dY.push_back(P * d * P * e);
    }

    static std::vector<int> kept(const Level& Lp, const Level& L) {
        std::vector<int> out;
        for (int j = 0; j < static_cast<int>(Lp.axes.size()); ++j)
            if (j != L.removed) out.push_back(j);
        return out;
    }

    Eigen::MatrixXd invert_form(const Eigen::MatrixXd& O) const {
        try {
            return invert_omega(O, tol_.omega_cond_max);
        } catch (const SingularOmega& e) {
            throw FlowFailure(std::string("pulled-back form degenerate: ") + e.what());
        }
    }

    // Chooses the slice of level 1 and the extension steps at the base point.
    void plan() {
        levels_.clear();
        const Eigen::MatrixXd u0 = fc_.transport->complete(base_, fc_.pc->initial());
        Ctx c = context(base_, fc_.transport->free_part(u0));
        Eigen::MatrixXd R = -c.P * c.U.transpose();
        Level l1;
        l1.k = m_;
        for (int step = m_; step < n_; ++step) {
            int best = -1;
            double bv = -1;
            for (int j = 0; j < n_; ++j) {
                if (std::find(l1.axes.begin(), l1.axes.end(), j) != l1.axes.end()) continue;
                Eigen::MatrixXd Rj(n_, R.cols() + 1);
                Rj << R, Eigen::VectorXd::Unit(n_, j);
                const double vol = std::sqrt(std::max(0.0, (Rj.transpose() * Rj).determinant()));
                if (vol > bv) { bv = vol; best = j; }
            }
            l1.axes.push_back(best);
            Eigen::MatrixXd Rn(n_, R.cols() + 1);
            Rn << R, Eigen::VectorXd::Unit(n_, best);
            R = std::move(Rn);
        }
        std::sort(l1.axes.begin(), l1.axes.end());
        levels_.push_back(l1);
        while (levels_.back().k < n_) {
            const Level& Lp = levels_.back();
            Form fp = form(levels_.size() - 1, c);
            Level L;
            L.k = Lp.k + 1;
            double bv = -1;
            for (int cc = 0; cc < n_; ++cc) {
                Eigen::MatrixXd rows(Lp.k + 1, n_);
                rows << fp.O.topRows(Lp.k), Eigen::RowVectorXd::Unit(n_, cc);
                Eigen::JacobiSVD<Eigen::MatrixXd> svd(rows);
                const double smin = svd.singularValues()[Lp.k];
                if (smin > bv) { bv = smin; L.c = cc; }
            }
            if (!(bv > 1e-8)) throw ConstructionError("no independent extension function (transversal construction failed)");
            Eigen::MatrixXd P = invert_form(fp.O);
            const Eigen::VectorXd Y = -P * Eigen::VectorXd::Unit(n_, L.c);
            double yb = -1;
            for (int j = 0; j < static_cast<int>(Lp.axes.size()); ++j)
                if (std::abs(Y[Lp.k + j]) > yb) { yb = std::abs(Y[Lp.k + j]); L.removed = j; }
            if (!(yb > 1e-10)) throw ConstructionError("extension field tangent to the rectified directions");
            for (int j = 0; j < static_cast<int>(Lp.axes.size()); ++j)
                if (j != L.removed) L.axes.push_back(Lp.axes[static_cast<std::size_t>(j)]);
            levels_.push_back(L);
        }
    }

    Eigen::VectorXd slice_point(const Level& L, const Eigen::VectorXd& s) const {
        Eigen::VectorXd x = base_;
        for (std::size_t j = 0; j < L.axes.size(); ++j) x[L.axes[j]] = s[static_cast<Eigen::Index>(j)];
        return x;
    }

    // Max entrywise variance of the τ-τ block of each level's form over a
    // slice grid.
    double bracket_variance(const Box& box) const {
        double worst = 0;
        for (std::size_t l = 0; l < levels_.size(); ++l) {
            const Level& L = levels_[l];
            std::vector<Eigen::MatrixXd> blocks;
            if (L.axes.empty()) continue;
            Box sb;
            for (int a : L.axes) sb.push_back(box[static_cast<std::size_t>(a)]);
            Grid grid(sb, 3);
            for (const auto& s : grid.points()) {
                const Eigen::VectorXd x = slice_point(L, s);
                Ctx c = context(x, free_at(x));
                blocks.push_back(form(l, c).O.topLeftCorner(L.k, L.k));
            }
            Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(L.k, L.k);
            for (const auto& b : blocks) mean += b;
            mean /= static_cast<double>(blocks.size());
            Eigen::MatrixXd var = Eigen::MatrixXd::Zero(L.k, L.k);
            for (const auto& b : blocks) var += (b - mean).cwiseAbs2();
            var /= static_cast<double>(blocks.size());
            worst = std::max(worst, var.maxCoeff());
        }
        return worst;
    }

    // Level-1 map (τ, s) ↦ x: flow of Σ τ_a X_{f^a} from the slice point.
    void psi1(const Eigen::VectorXd& q, Eigen::VectorXd& x, Eigen::MatrixXd& D) const {
        const Level& L = levels_[0];
        const int n = n_, m = m_, r = n - m;
        const Eigen::VectorXd tau = q.head(m);
        const Eigen::VectorXd x0 = slice_point(L, q.tail(r));
        const Eigen::MatrixXd uf0 = free_at(x0);
        OdeState st(static_cast<std::size_t>(n + m * m + n * r), 0.0);
        Eigen::Map<Eigen::VectorXd>(st.data(), n) = x0;
        Eigen::Map<Eigen::MatrixXd>(st.data() + n, m, m) = uf0;
        Eigen::Map<Eigen::MatrixXd> W0(st.data() + n + m * m, n, r);
        W0.setZero();
        for (int j = 0; j < r; ++j) W0(L.axes[static_cast<std::size_t>(j)], j) = 1;
        if (tau.cwiseAbs().maxCoeff() > 0) {
            OdeRhs rhs = [&](const OdeState& y, OdeState& dy, double) {
                Ctx c = context(Eigen::Map<const Eigen::VectorXd>(y.data(), n),
                                Eigen::Map<const Eigen::MatrixXd>(y.data() + n, m, m));
                Eigen::Map<const Eigen::MatrixXd> Wm(y.data() + n + m * m, n, r);
                const Eigen::VectorXd v = -c.P * c.U.transpose() * tau;
                Eigen::MatrixXd DV(n, n);
                for (int k = 0; k < n; ++k) DV.col(k) = dX(c, k) * tau;
                dy.resize(y.size());
                Eigen::Map<Eigen::VectorXd>(dy.data(), n) = v;
                Eigen::Map<Eigen::MatrixXd>(dy.data() + n, m, m) =
                    fc_.transport->free_part(CovectorTransport::rate(c.G, c.U, v));
                Eigen::Map<Eigen::MatrixXd>(dy.data() + n + m * m, n, r) = DV * Wm;
            };
            st = integrate(rhs, st, 0.0, 1.0, OdeOptions{tol_.ode_atol, tol_.ode_rtol});
        }
        x = Eigen::Map<const Eigen::VectorXd>(st.data(), n);
        Ctx c = context(x, Eigen::Map<const Eigen::MatrixXd>(st.data() + n, m, m));
        D.resize(n, n);
        D.leftCols(m) = -c.P * c.U.transpose();
        D.rightCols(r) = Eigen::Map<const Eigen::MatrixXd>(st.data() + n + m * m, n, r);
    }

    // Level-ℓ map (ℓ ≥ 1 as index): coordinates of `level` ↦ coordinates of level−1.
    void psi(std::size_t level, const Eigen::VectorXd& q, Eigen::VectorXd& qp, Eigen::MatrixXd& D) const {
        const Level& L = levels_[level];
        const Level& Lp = levels_[level - 1];
        const int n = n_, m = m_, kp = Lp.k;
        const int sp = static_cast<int>(Lp.axes.size()), sn = static_cast<int>(L.axes.size());
        const double tnew = q[kp];
        const std::vector<int> keep = kept(Lp, L);
        Eigen::VectorXd s0(sp);
        s0[L.removed] = base_[Lp.axes[static_cast<std::size_t>(L.removed)]];
        for (int j = 0; j < sn; ++j) s0[keep[static_cast<std::size_t>(j)]] = q[L.k + j];
        const Eigen::VectorXd x0 = slice_point(Lp, s0);
        // state: s (sp), τ shift (kp), u_free (m×m), W (n×sn)
        const int off_u = sp + kp, off_w = off_u + m * m;
        OdeState st(static_cast<std::size_t>(off_w + n * sn), 0.0);
        Eigen::Map<Eigen::VectorXd>(st.data(), sp) = s0;
        Eigen::Map<Eigen::MatrixXd>(st.data() + off_u, m, m) = free_at(x0);
        Eigen::Map<Eigen::MatrixXd> W0(st.data() + off_w, n, sn);
        W0.setZero();
        for (int j = 0; j < sn; ++j) W0(kp + keep[static_cast<std::size_t>(j)], j) = 1;
        auto eval = [&](const OdeState& y, Ctx& c, Eigen::VectorXd& Y, std::vector<Eigen::VectorXd>& dY) {
            const Eigen::VectorXd x = slice_point(Lp, Eigen::Map<const Eigen::VectorXd>(y.data(), sp));
            c = context(x, Eigen::Map<const Eigen::MatrixXd>(y.data() + off_u, m, m));
            Form fp = form(level - 1, c);
            field(Lp, L, fp, Y, dY);
        };
        if (tnew != 0) {
            OdeRhs rhs = [&](const OdeState& y, OdeState& dy, double) {
                Ctx c;
                Eigen::VectorXd Y;
                std::vector<Eigen::VectorXd> dY;
                eval(y, c, Y, dY);
                const Eigen::VectorXd v = tnew * Y;
                Eigen::VectorXd xdot = Eigen::VectorXd::Zero(n);
                for (int j = 0; j < sp; ++j) xdot[Lp.axes[static_cast<std::size_t>(j)]] = v[kp + j];
                Eigen::MatrixXd DY = Eigen::MatrixXd::Zero(n, n);
                for (int j = 0; j < sp; ++j) DY.col(kp + j) = tnew * dY[static_cast<std::size_t>(j)];
                dy.resize(y.size());
                Eigen::Map<Eigen::VectorXd>(dy.data(), sp) = v.tail(sp);
                Eigen::Map<Eigen::VectorXd>(dy.data() + sp, kp) = v.head(kp);
                Eigen::Map<Eigen::MatrixXd>(dy.data() + off_u, m, m) =
                    fc_.transport->free_part(CovectorTransport::rate(c.G, c.U, xdot));
                Eigen::Map<Eigen::MatrixXd>(dy.data() + off_w, n, sn) =
                    DY * Eigen::Map<const Eigen::MatrixXd>(y.data() + off_w, n, sn);
            };
            st = integrate(rhs, st, 0.0, 1.0, OdeOptions{tol_.ode_atol, tol_.ode_rtol});
        }
        Ctx c;
        Eigen::VectorXd Y;
        std::vector<Eigen::VectorXd> dY;
        eval(st, c, Y, dY);
        qp.resize(n);
        qp.head(kp) = q.head(kp) + Eigen::Map<const Eigen::VectorXd>(st.data() + sp, kp);
        qp.tail(sp) = Eigen::Map<const Eigen::VectorXd>(st.data(), sp);
        D = Eigen::MatrixXd::Zero(n, n);
        for (int j = 0; j < kp; ++j) D(j, j) = 1;
        D.col(kp) = Y;
        D.rightCols(sn) = Eigen::Map<const Eigen::MatrixXd>(st.data() + off_w, n, sn);
    }

    // Final chart coordinates (all τ) ↦ x with dx/dy.
    ChartMap::Sample sample(const Eigen::VectorXd& y) const {
        Eigen::VectorXd q = y;
        Eigen::MatrixXd J = Eigen::MatrixXd::Identity(n_, n_);
        for (std::size_t l = levels_.size() - 1; l >= 1; --l) {
            Eigen::VectorXd qp;
            Eigen::MatrixXd D;
            psi(l, q, qp, D);
            J = D * J;
            q = qp;
        }
        ChartMap::Sample out;
        out.y = y;
        Eigen::MatrixXd D;
        psi1(q, out.x, D);
        out.dx_dy = D * J;
        return out;
    }

private:
    MatrixJet w_;
    Eigen::VectorXd base_;
    Box allowed_;
    Tolerances tol_;
    int n_, m_ = 0;
    detail::FlatCovectors fc_;
    std::vector<Level> levels_;
};

}  // namespace

FlatChartResult joint_flat_chart(const MatrixJet& g, const MatrixJet& w, const Box& box, const Eigen::VectorXd& base,
                                 const Tolerances& tol, int certify_grid) {
    const int n = w.dim();
    auto jb = std::make_shared<JointBuilder>(g, w, base, inflate(box, 1.0), tol);
    jb->plan();
    const double var = jb->bracket_variance(box);
    if (var > tol.tol_bracket_var)
        throw ConstructionError("non-constant Poisson brackets among flat functions (variance " + std::to_string(var) + ")");

    double dist = INFINITY;
    for (int a = 0; a < n; ++a)
        dist = std::min({dist, base[a] - box[static_cast<std::size_t>(a)].lo, box[static_cast<std::size_t>(a)].hi - base[a]});
    if (!(dist > 0)) throw ConstructionError("base point lies on the box boundary");
    const Eigen::MatrixXd J0 = jb->sample(Eigen::VectorXd::Zero(n)).dx_dy;
    double r = 0.5 * dist / std::max(1e-12, J0.cwiseAbs().rowwise().sum().maxCoeff());

    auto g_jet = std::make_shared<const MatrixJet>(g);
    auto w_jet = std::make_shared<const MatrixJet>(w);
    MatrixFn b = [g_jet, w_jet](const Eigen::VectorXd& x) { return Eigen::MatrixXd(g_jet->value(x) + w_jet->value(x)); };
    double scale = 1;
    const Grid sgrid(box, default_grid_per_axis(n));
    for (const auto& p : sgrid.points()) scale = std::max(scale, b(p).cwiseAbs().maxCoeff());

    FlatChartResult res;
    res.method = "joint";
    std::string last_error;
    for (int attempt = 0; attempt <= tol.max_box_shrink; ++attempt) {
        Box pbox(static_cast<std::size_t>(n), Interval{-r, r});
        ChartMap::Sampler s = detail::memoize([jb](const Eigen::VectorXd& y) { return jb->sample(y); });
        try {
            ChartMap chart(ChartMap::Kind::Parametrization, pbox, Eigen::VectorXd::Zero(n), s,
                           "composed Hamiltonian flows of the flat functions and their constant-bracket extensions");
            chart.certify(certify_grid, tol.jac_min);
            VerifyResult vr = verify_flat_chart(b, chart, certify_grid);
            if (!(vr.max_deviation <= tol.tol_construct * scale))
                throw FlowFailure("pullback deviation " + std::to_string(vr.max_deviation));
            res.chart = std::move(chart);
            res.C = vr.C;
            res.deviation = std::move(vr.deviation);
            res.max_deviation = vr.max_deviation;
            res.box_shrinks = attempt;
            break;
        } catch (const std::runtime_error& e) {
            last_error = e.what();
            if (attempt == tol.max_box_shrink)
                throw ConstructionError("joint construction failed after " + std::to_string(attempt) +
                                        " box shrinks: " + last_error);
            r *= 0.5;
        }
    }
    res.certify_grid = certify_grid;
    res.m = jb->m();
    res.c = jb->covectors().c;
    res.covectors = jb->covectors().pc;
    res.diagnostics.push_back({"bracket_variance", var, tol.tol_bracket_var, var <= tol.tol_bracket_var});
    res.diagnostics.push_back({"jacobian_min", res.chart.certificate(), tol.jac_min, true});
    if (res.box_shrinks > 0)
        res.notes.push_back("parameter box halved " + std::to_string(res.box_shrinks) + " time(s): " + last_error);
    return res;
}

}  // namespace flatform
