#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <sstream>

#include "construct_internal.hpp"
#include "flatform/construct.hpp"

namespace flatform {

// ---- CovectorTransport ------------------------------------------------------

CovectorTransport::CovectorTransport(const MatrixJet& g, const Eigen::VectorXd& base, const Tolerances& tol)
    : g_(g), sys_(&g_, nullptr, tol.sigma_tol, tol.tol_lin), base_(base), n_(g.dim()), tol_(tol) {
    try {
        k0_ = kernel_basis(g_.value(base_), tol.sigma_tol, tol.kernel_cond_max);
    } catch (const KernelPivotError& e) {
        throw ConstructionError(std::string("kernel pivot: ") + e.what());
    }
    m_ = k0_.m;
}

KernelData CovectorTransport::kernel(const Eigen::VectorXd& x) const {
    try {
        return kernel_basis_fixed(g_.value(x), tol_.sigma_tol, k0_.pivot, tol_.kernel_cond_max);
    } catch (const KernelPivotError& e) {
        throw ConstructionError(std::string("kernel pivot: ") + e.what());
    }
}

Eigen::MatrixXd CovectorTransport::complete(const Eigen::VectorXd& x, const Eigen::MatrixXd& u_free) const {
    if (k0_.pivot.empty()) return u_free;
    KernelData kd = kernel(x);
    Eigen::MatrixXd u(u_free.rows(), n_);
    for (Eigen::Index c = 0; c < u_free.rows(); ++c) u.row(c) = kd.complete(u_free.row(c).transpose()).transpose();
    return u;
}

Eigen::MatrixXd CovectorTransport::rate(const Christoffel& G, const Eigen::MatrixXd& u, const Eigen::VectorXd& d) {
    const int n = G.n;
    // A_si = Σ_j Γ^s_ij d^j, so du = u·A.
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
    for (int s = 0; s < n; ++s)
        for (int i = 0; i < n; ++i) {
            double v = 0;
            for (int j = 0; j < n; ++j) v += G(s, i, j) * d[j];
            A(s, i) = v;
        }
    return u * A;
}

Eigen::MatrixXd CovectorTransport::free_part(const Eigen::MatrixXd& u_full) const {
    Eigen::MatrixXd out(u_full.rows(), m_);
    for (int i = 0; i < m_; ++i) out.col(i) = u_full.col(k0_.nonpivot[static_cast<std::size_t>(i)]);
    return out;
}

// ---- ParallelCovector -------------------------------------------------------

ParallelCovector::ParallelCovector(std::shared_ptr<const CovectorTransport> t, Eigen::MatrixXd u0_free)
    : t_(std::move(t)), u0_(std::move(u0_free)) {
    if (u0_.cols() != t_->rank()) throw ConstructionError("initial covectors have the wrong number of free components");
}

OdeState ParallelCovector::pack(const Value& v) const {
    const Eigen::Index k = u0_.rows(), m = u0_.cols();
    Eigen::MatrixXd uf = t_->free_part(v.u);
    OdeState s(static_cast<std::size_t>(k * m + k));
    for (Eigen::Index c = 0; c < k; ++c) {
        for (Eigen::Index i = 0; i < m; ++i) s[static_cast<std::size_t>(c * m + i)] = uf(c, i);
        s[static_cast<std::size_t>(k * m + c)] = v.f[c];
    }
    return s;
}

ParallelCovector::Value ParallelCovector::unpack(const Eigen::VectorXd& x, const OdeState& s) const {
    const Eigen::Index k = u0_.rows(), m = u0_.cols();
    Eigen::MatrixXd uf(k, m);
    Value v;
    v.f.resize(k);
    for (Eigen::Index c = 0; c < k; ++c) {
        for (Eigen::Index i = 0; i < m; ++i) uf(c, i) = s[static_cast<std::size_t>(c * m + i)];
        v.f[c] = s[static_cast<std::size_t>(k * m + c)];
    }
    v.u = t_->complete(x, uf);
    return v;
}

std::vector<OdeState> ParallelCovector::along_axis(const Eigen::VectorXd& x, const OdeState& s, int a,
                                                   const std::vector<double>& targets) const {
    const Eigen::Index k = u0_.rows(), m = u0_.cols();
    const int n = t_->dim();
    Eigen::VectorXd d = Eigen::VectorXd::Unit(n, a);
    OdeRhs rhs = [&](const OdeState& y, OdeState& dy, double t) {
        Eigen::VectorXd p = x;
        p[a] = t;
        Value v = unpack(p, y);
        Eigen::MatrixXd du = t_->free_part(CovectorTransport::rate(t_->gamma(p), v.u, d));
        dy.assign(y.size(), 0.0);
        for (Eigen::Index c = 0; c < k; ++c) {
            for (Eigen::Index i = 0; i < m; ++i) dy[static_cast<std::size_t>(c * m + i)] = du(c, i);
            dy[static_cast<std::size_t>(k * m + c)] = v.u(c, a);
        }
    };
    OdeOptions opt{t_->tol().ode_atol, t_->tol().ode_rtol};
    const double t0 = x[a];
    std::vector<std::size_t> up, down;
    for (std::size_t i = 0; i < targets.size(); ++i) (targets[i] >= t0 ? up : down).push_back(i);
    std::sort(up.begin(), up.end(), [&](auto i, auto j) { return targets[i] < targets[j]; });
    std::sort(down.begin(), down.end(), [&](auto i, auto j) { return targets[i] > targets[j]; });
    std::vector<OdeState> out(targets.size());
    for (const auto* idx : {&up, &down}) {
        if (idx->empty()) continue;
        std::vector<double> ts;
        for (auto i : *idx) ts.push_back(targets[i]);
        auto states = integrate_times(rhs, s, t0, ts, opt);
        for (std::size_t j = 0; j < idx->size(); ++j) out[(*idx)[j]] = states[j];
    }
    return out;
}

ParallelCovector::Value ParallelCovector::value(const Eigen::VectorXd& x) const {
    const int n = t_->dim();
    Eigen::VectorXd p = t_->base();
    Value v0{t_->complete(p, u0_), Eigen::VectorXd::Zero(u0_.rows())};
    OdeState s = pack(v0);
    for (int a = 0; a < n; ++a) {
        s = along_axis(p, s, a, {x[a]}).front();
        p[a] = x[a];
    }
    return unpack(p, s);
}

namespace {

struct SweepNode {
    std::vector<int> multi;
    Eigen::VectorXd x;
    OdeState s;
};

}  // namespace

static std::vector<SweepNode> sweep_states(const ParallelCovector& pc, const OdeState& s0, const Eigen::VectorXd& base,
                                           const Grid& grid, const std::vector<int>& order,
                                           const std::function<std::vector<OdeState>(const Eigen::VectorXd&, const OdeState&,
                                                                                     int, const std::vector<double>&)>& step) {
    (void)pc;
    const int n = grid.dim();
    std::vector<SweepNode> nodes{{std::vector<int>(static_cast<std::size_t>(n), -1), base, s0}};
    for (int a : order) {
        const auto& ax = grid.axes()[static_cast<std::size_t>(a)];
        std::vector<SweepNode> next;
        next.reserve(nodes.size() * ax.size());
        for (const auto& nd : nodes) {
            auto states = step(nd.x, nd.s, a, ax);
            for (std::size_t t = 0; t < ax.size(); ++t) {
                SweepNode c = nd;
                c.multi[static_cast<std::size_t>(a)] = static_cast<int>(t);
                c.x[a] = ax[t];
                c.s = std::move(states[t]);
                next.push_back(std::move(c));
            }
        }
        nodes = std::move(next);
    }
    std::vector<SweepNode> ordered(nodes.size());
    for (auto& nd : nodes) ordered[grid.index(nd.multi)] = std::move(nd);
    return ordered;
}

std::vector<ParallelCovector::Value> ParallelCovector::sweep(const Grid& grid, const std::vector<int>& axis_order) const {
    Value v0{t_->complete(t_->base(), u0_), Eigen::VectorXd::Zero(u0_.rows())};
    auto step = [this](const Eigen::VectorXd& x, const OdeState& s, int a, const std::vector<double>& ts) {
        return along_axis(x, s, a, ts);
    };
    auto nodes = sweep_states(*this, pack(v0), t_->base(), grid, axis_order, step);
    std::vector<Value> out;
    out.reserve(nodes.size());
    for (const auto& nd : nodes) out.push_back(unpack(nd.x, nd.s));
    return out;
}

static double state_gap(const OdeState& a, const OdeState& b) {
    double w = 0;
    for (std::size_t i = 0; i < a.size(); ++i) w = std::max(w, std::abs(a[i] - b[i]));
    return w;
}

double ParallelCovector::loop_defect(const Grid& grid) const {
    const int n = grid.dim();
    std::vector<int> order(static_cast<std::size_t>(n));
    for (int a = 0; a < n; ++a) order[static_cast<std::size_t>(a)] = a;
    Value v0{t_->complete(t_->base(), u0_), Eigen::VectorXd::Zero(u0_.rows())};
    auto step = [this](const Eigen::VectorXd& x, const OdeState& s, int a, const std::vector<double>& ts) {
        return along_axis(x, s, a, ts);
    };
    auto nodes = sweep_states(*this, pack(v0), t_->base(), grid, order, step);
    double worst = 0;
    const int N = grid.per_axis();
    for (const auto& nd : nodes)
        for (int a = 0; a < n; ++a)
            for (int b = a + 1; b < n; ++b) {
                const int ia = nd.multi[static_cast<std::size_t>(a)], ib = nd.multi[static_cast<std::size_t>(b)];
                if (ia + 1 >= N || ib + 1 >= N) continue;
                const double ta = grid.axes()[static_cast<std::size_t>(a)][static_cast<std::size_t>(ia + 1)];
                const double tb = grid.axes()[static_cast<std::size_t>(b)][static_cast<std::size_t>(ib + 1)];
                Eigen::VectorXd xa = nd.x, xb = nd.x;
                xa[a] = ta;
                xb[b] = tb;
                OdeState s1 = along_axis(nd.x, nd.s, a, {ta}).front();
                s1 = along_axis(xa, s1, b, {tb}).front();
                OdeState s2 = along_axis(nd.x, nd.s, b, {tb}).front();
                s2 = along_axis(xb, s2, a, {ta}).front();
                worst = std::max(worst, state_gap(s1, s2));
            }
    return worst;
}

double ParallelCovector::reorder_defect(const Grid& grid) const {
    const int n = grid.dim();
    std::vector<int> fwd(static_cast<std::size_t>(n));
    for (int a = 0; a < n; ++a) fwd[static_cast<std::size_t>(a)] = a;
    std::vector<int> rev(fwd.rbegin(), fwd.rend());
    auto A = sweep(grid, fwd), B = sweep(grid, rev);
    double worst = 0;
    for (std::size_t i = 0; i < A.size(); ++i) {
        worst = std::max(worst, (A[i].u - B[i].u).cwiseAbs().maxCoeff());
        if (A[i].f.size() > 0) worst = std::max(worst, (A[i].f - B[i].f).cwiseAbs().maxCoeff());
    }
    return worst;
}

int default_loop_grid(int n) { return n <= 2 ? 5 : (n == 3 ? 4 : 3); }

// ---- flat chart for a degenerate (or not) symmetric form --------------------

namespace {

// Index of x in the grid when every coordinate sits on a node.
bool grid_lookup(const Grid& grid, const Eigen::VectorXd& x, std::size_t& idx) {
    std::vector<int> multi(static_cast<std::size_t>(grid.dim()));
    for (int a = 0; a < grid.dim(); ++a) {
        const auto& ax = grid.axes()[static_cast<std::size_t>(a)];
        const double w = std::max(1.0, std::abs(ax.back() - ax.front()));
        auto it = std::lower_bound(ax.begin(), ax.end(), x[a] - 1e-12 * w);
        if (it == ax.end() || std::abs(*it - x[a]) > 1e-12 * w) return false;
        multi[static_cast<std::size_t>(a)] = static_cast<int>(it - ax.begin());
    }
    idx = grid.index(multi);
    return true;
}

}  // namespace

namespace detail {

FlatCovectors flat_covectors(const MatrixJet& g, const Eigen::VectorXd& base, const Tolerances& tol) {
    auto transport = std::make_shared<const CovectorTransport>(g, base, tol);
    const int m = transport->rank();
    if (m == 0) throw ConstructionError("symmetric part vanishes at the base point; nothing to construct");

    // Normalize the initial covectors so that g = Σ c̃_a f^a ⊗ f^a with c̃ = ±1.
    Eigen::MatrixXd U = transport->complete(base, Eigen::MatrixXd::Identity(m, m));
    Eigen::MatrixXd G0 = g.value(base);
    Eigen::MatrixXd UUt = (U * U.transpose()).inverse();
    Eigen::MatrixXd c = UUt * U * G0 * U.transpose() * UUt;
    c = 0.5 * (c + c.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c);
    std::vector<int> idx(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) idx[static_cast<std::size_t>(i)] = i;
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
        const double la = es.eigenvalues()[a], lb = es.eigenvalues()[b];
        if ((la > 0) != (lb > 0)) return la > 0;
        return std::abs(la) > std::abs(lb);
    });
    Eigen::MatrixXd S(m, m);
    Eigen::MatrixXd csign = Eigen::MatrixXd::Zero(m, m);
    for (int r = 0; r < m; ++r) {
        const int j = idx[static_cast<std::size_t>(r)];
        const double lam = es.eigenvalues()[j];
        S.row(r) = std::sqrt(std::abs(lam)) * es.eigenvectors().col(j).transpose();
        csign(r, r) = lam > 0 ? 1.0 : -1.0;
    }
    FlatCovectors out;
    out.transport = transport;
    out.pc = std::make_shared<const ParallelCovector>(transport, S);
    out.c = csign;
    out.m = m;
    return out;
}

ChartMap::Sampler memoize(ChartMap::Sampler s) {
    struct Cache {
        std::mutex mu;
        std::map<std::vector<double>, ChartMap::Sample> m;
    };
    auto cache = std::make_shared<Cache>();
    return [s = std::move(s), cache](const Eigen::VectorXd& q) {
        std::vector<double> key(q.data(), q.data() + q.size());
        {
            std::lock_guard<std::mutex> lk(cache->mu);
            auto it = cache->m.find(key);
            if (it != cache->m.end()) return it->second;
        }
        ChartMap::Sample v = s(q);
        std::lock_guard<std::mutex> lk(cache->mu);
        cache->m.emplace(std::move(key), v);
        return v;
    };
}

}  // namespace detail

FlatChartResult flat_chart_symmetric(const MatrixJet& g, const Chart& chart, const Tolerances& tol, int certify_grid) {
    const int n = chart.dim();
    detail::FlatCovectors fc = detail::flat_covectors(g, chart.base(), tol);
    auto transport = fc.transport;
    auto pc = fc.pc;
    const int m = fc.m;
    const Eigen::MatrixXd& S = pc->initial();
    const Eigen::MatrixXd& csign = fc.c;

    // Complete f with coordinate functions, maximizing the spanned volume.
    Eigen::MatrixXd R = transport->complete(chart.base(), S);
    std::vector<int> extra;
    for (int step = m; step < n; ++step) {
        int best = -1;
        double bv = -1;
        for (int j = 0; j < n; ++j) {
            if (std::find(extra.begin(), extra.end(), j) != extra.end()) continue;
            Eigen::MatrixXd Rj(R.rows() + 1, n);
            Rj << R, Eigen::RowVectorXd::Unit(n, j);
            const double vol = std::sqrt(std::max(0.0, (Rj * Rj.transpose()).determinant()));
            if (vol > bv) { bv = vol; best = j; }
        }
        extra.push_back(best);
        Eigen::MatrixXd Rn(R.rows() + 1, n);
        Rn << R, Eigen::RowVectorXd::Unit(n, best);
        R = std::move(Rn);
    }

    Grid cgrid(chart.box(), certify_grid);
    std::vector<int> order(static_cast<std::size_t>(n));
    for (int a = 0; a < n; ++a) order[static_cast<std::size_t>(a)] = a;
    auto cache = std::make_shared<const std::vector<ParallelCovector::Value>>(pc->sweep(cgrid, order));
    auto cgrid_ptr = std::make_shared<const Grid>(cgrid);

    ChartMap::Sampler sampler = [pc, cache, cgrid_ptr, extra, m, n](const Eigen::VectorXd& x) {
        std::size_t i = 0;
        ParallelCovector::Value v = grid_lookup(*cgrid_ptr, x, i) ? (*cache)[i] : pc->value(x);
        ChartMap::Sample out;
        out.x = x;
        out.y.resize(n);
        Eigen::MatrixXd dy_dx(n, n);
        for (int a = 0; a < m; ++a) {
            out.y[a] = v.f[a];
            dy_dx.row(a) = v.u.row(a);
        }
        for (std::size_t r = 0; r < extra.size(); ++r) {
            const int row = m + static_cast<int>(r);
            out.y[row] = x[extra[r]];
            dy_dx.row(row) = Eigen::RowVectorXd::Unit(n, extra[r]);
        }
        Eigen::FullPivLU<Eigen::MatrixXd> lu(dy_dx);
        if (!lu.isInvertible()) throw ConstructionError("flat chart Jacobian singular");
        out.dx_dy = lu.inverse();
        return out;
    };

    std::ostringstream desc;
    desc << "y = (";
    for (int a = 0; a < m; ++a) desc << (a ? ", " : "") << "f" << (a + 1);
    for (int j : extra) desc << ", " << chart.names()[static_cast<std::size_t>(j)];
    desc << "), f parallel potentials";

    FlatChartResult res;
    res.method = "pfaffian";
    res.chart = ChartMap(ChartMap::Kind::Coordinates, chart.box(), chart.base(), sampler, desc.str());
    try {
        res.chart.certify(certify_grid, tol.jac_min);
    } catch (const std::runtime_error& e) {
        throw ConstructionError(e.what());
    }
    res.m = m;
    res.c = csign;
    res.covectors = pc;
    res.certify_grid = certify_grid;
    for (const auto& v : *cache) res.f_values.push_back(v.f);

    CompiledMatrix gm(g.expr());
    VerifyResult vr = verify_flat_chart(gm, res.chart, certify_grid);
    res.C = vr.C;
    res.deviation = vr.deviation;
    res.max_deviation = vr.max_deviation;

    Grid lgrid(chart.box(), default_loop_grid(n));
    const double loop = pc->loop_defect(lgrid);
    const double reorder = pc->reorder_defect(lgrid);
    ParallelCovector zero(transport, Eigen::MatrixXd::Zero(1, m));
    double zp = 0;
    for (const auto& v : zero.sweep(lgrid, order)) zp = std::max({zp, v.u.cwiseAbs().maxCoeff(), std::abs(v.f[0])});
    double annihilator = 0;
    for (std::size_t i = 0; i < cgrid.size(); ++i) {
        KernelData kd = transport->kernel(cgrid[i]);
        if (kd.B.cols() > 0) annihilator = std::max(annihilator, ((*cache)[i].u * kd.B).cwiseAbs().maxCoeff());
    }
    res.diagnostics.push_back({"loop_defect", loop, tol.tol_loop, loop <= tol.tol_loop});
    res.diagnostics.push_back({"reorder_defect", reorder, tol.tol_loop, reorder <= tol.tol_loop});
    res.diagnostics.push_back({"zero_propagation", zp, 1e-9, zp <= 1e-9});
    res.diagnostics.push_back({"annihilator", annihilator, 1e-6, annihilator <= 1e-6});
    res.diagnostics.push_back({"pivot_condition", transport->base_kernel().pivot_condition, tol.kernel_cond_max,
                               transport->base_kernel().pivot_condition <= tol.kernel_cond_max});
    return res;
}

}  // namespace flatform
