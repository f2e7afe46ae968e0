#include "flatform/connection.hpp"

#include <cmath>

#include "flatform/kernel.hpp"

namespace flatform {

ChristoffelFirst::ChristoffelFirst(const ExprMatrix& g) : n_(g.rows()) {
    e_.resize(static_cast<std::size_t>(n_ * n_ * n_));
    const Expr half(Rational(1, 2));
    for (int i = 0; i < n_; ++i)
        for (int j = i; j < n_; ++j)
            for (int s = 0; s < n_; ++s) {
                Expr v = half * make_sum({g(j, s).diff(i), g(i, s).diff(j), -g(i, j).diff(s)});
                e_[static_cast<std::size_t>((i * n_ + j) * n_ + s)] = v;
                e_[static_cast<std::size_t>((j * n_ + i) * n_ + s)] = v;
            }
    for (const auto& e : e_) c_.emplace_back(e);
}

std::vector<double> ChristoffelFirst::eval(const Eigen::VectorXd& x) const {
    std::vector<double> out(c_.size());
    for (std::size_t i = 0; i < c_.size(); ++i) out[i] = e_[i].is_zero() ? 0.0 : c_[i](x.data());
    return out;
}

StationarityResult stationarity_check(const ExprMatrix& g, const Grid& grid, double tol, double sigma_tol) {
    ChristoffelFirst cf(g);
    CompiledMatrix gm(g);
    const int n = g.rows();
    StationarityResult r;
    for (const auto& p : grid.points()) {
        Eigen::MatrixXd ker = null_space(gm(p), sigma_tol);
        double worst = 0.0;
        if (ker.cols() > 0) {
            std::vector<double> gf = cf.eval(p);
            for (Eigen::Index a = 0; a < ker.cols(); ++a)
                for (int i = 0; i < n; ++i)
                    for (int j = i; j < n; ++j) {
                        double s = 0;
                        for (int k = 0; k < n; ++k) s += gf[static_cast<std::size_t>((i * n + j) * n + k)] * ker(k, a);
                        worst = std::max(worst, std::abs(s));
                    }
        }
        r.per_point.push_back(worst);
        r.max_violation = std::max(r.max_violation, worst);
    }
    r.holds = r.max_violation <= tol;
    return r;
}

ConnectionSystem::ConnectionSystem(const MatrixJet* g, const MatrixJet* w, double sigma_tol, double tol_lin)
    : g_(g), w_(w), n_(g ? g->dim() : (w ? w->dim() : 0)), sigma_tol_(sigma_tol), tol_lin_(tol_lin) {
    if (!g_ && !w_) throw std::invalid_argument("connection system needs g or ω");
    if (g_ && w_ && g_->dim() != w_->dim()) throw std::invalid_argument("connection system dimension mismatch");
}

Imposed ConnectionSystem::imposed() const {
    if (g_ && w_) return Imposed::Joint;
    return g_ ? Imposed::G : Imposed::Omega;
}

int ConnectionSystem::unknown_index(int i, int j, int k) const {
    if (j > k) std::swap(j, k);
    const int pairs = n_ * (n_ + 1) / 2;
    return i * pairs + j * n_ - j * (j - 1) / 2 + (k - j);
}

ConnectionSystem::Solution ConnectionSystem::solve(const Eigen::VectorXd& x) const {
    const int n = n_;
    const int pairs = n * (n + 1) / 2;
    const int rows_g = g_ ? pairs * n : 0;
    const int rows_w = w_ ? (n * (n - 1) / 2) * n : 0;
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(rows_g + rows_w, unknowns());
    Eigen::VectorXd b(rows_g + rows_w);
    int r = 0;
    if (g_) {
        Eigen::MatrixXd G = g_->value(x);
        auto dG = g_->grad(x);
        for (int i = 0; i < n; ++i)
            for (int j = i; j < n; ++j)
                for (int k = 0; k < n; ++k, ++r) {
                    for (int s = 0; s < n; ++s) {
                        A(r, unknown_index(s, j, k)) += G(i, s);
                        A(r, unknown_index(s, i, k)) += G(j, s);
                    }
                    b[r] = dG[k](i, j);
                }
    }
    if (w_) {
        Eigen::MatrixXd W = w_->value(x);
        auto dW = w_->grad(x);
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j)
                for (int k = 0; k < n; ++k, ++r) {
                    for (int s = 0; s < n; ++s) {
                        A(r, unknown_index(s, i, k)) += W(s, j);
                        A(r, unknown_index(s, j, k)) += W(i, s);
                    }
                    b[r] = dW[k](i, j);
                }
    }
    Solution sol;
    sol.gamma = Christoffel(n);
    Eigen::VectorXd z = Eigen::VectorXd::Zero(unknowns());
    if (A.rows() > 0 && A.cwiseAbs().maxCoeff() > 0.0) {
        Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod;
        cod.setThreshold(sigma_tol_);
        cod.compute(A);
        sol.rank = static_cast<int>(cod.rank());
        z = cod.solve(b);
    }
    Eigen::VectorXd res = A * z - b;
    if (rows_g) {
        sol.residual_g = res.head(rows_g).norm();
        sol.rhs_g = b.head(rows_g).norm();
        sol.solvable_g = sol.residual_g <= tol_lin_ * (1.0 + sol.rhs_g);
    }
    if (rows_w) {
        sol.residual_w = res.tail(rows_w).norm();
        sol.rhs_w = b.tail(rows_w).norm();
        sol.solvable_w = sol.residual_w <= tol_lin_ * (1.0 + sol.rhs_w);
    }
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) sol.gamma(i, j, k) = z[unknown_index(i, j, k)];
    return sol;
}

GammaFn ConnectionSystem::gamma_fn() const {
    return [this](const Eigen::VectorXd& x) { return solve(x).gamma; };
}

SolvabilitySweep sweep_solvability(const ConnectionSystem& sys, const Grid& grid) {
    SolvabilitySweep s;
    for (const auto& p : grid.points()) {
        auto sol = sys.solve(p);
        s.max_residual_g = std::max(s.max_residual_g, sol.residual_g);
        s.max_residual_w = std::max(s.max_residual_w, sol.residual_w);
        // ratio relative to the per-point threshold; > 1 means infeasible there
        auto ratio = [&](double res, double rhs) { return res / (sys.tol_lin() * (1.0 + rhs)); };
        s.max_ratio_g = std::max(s.max_ratio_g, ratio(sol.residual_g, sol.rhs_g));
        s.max_ratio_w = std::max(s.max_ratio_w, ratio(sol.residual_w, sol.rhs_w));
        s.solvable_g = s.solvable_g && sol.solvable_g;
        s.solvable_w = s.solvable_w && sol.solvable_w;
        s.ranks.push_back(sol.rank);
    }
    for (int r : s.ranks)
        if (r != s.ranks.front()) s.constant_rank = false;
    return s;
}

namespace {

int ipow(int n, int k) {
    int r = 1;
    while (k-- > 0) r *= n;
    return r;
}

}  // namespace

Eigen::VectorXd covariant_derivative(const TensorFn& t, int up, int down, const Christoffel& gamma,
                                     const Eigen::VectorXd& x, double h) {
    const int n = gamma.n;
    const int rank = up + down;
    const int sz = ipow(n, rank);
    Eigen::VectorXd t0 = t(x);
    Eigen::VectorXd out(n * sz);
    for (int k = 0; k < n; ++k) {
        auto central = [&](double step) {
            Eigen::VectorXd a = x, b = x;
            a[k] += step;
            b[k] -= step;
            return Eigen::VectorXd((t(a) - t(b)) / (2 * step));
        };
        Eigen::VectorXd d = (4.0 * central(h / 2) - central(h)) / 3.0;
        std::vector<int> idx(static_cast<std::size_t>(rank));
        for (int flat = 0; flat < sz; ++flat) {
            int rem = flat;
            for (int a = rank - 1; a >= 0; --a) {
                idx[static_cast<std::size_t>(a)] = rem % n;
                rem /= n;
            }
            double v = d[flat];
            for (int a = 0; a < rank; ++a) {
                int stride = ipow(n, rank - 1 - a);
                int own = idx[static_cast<std::size_t>(a)];
                for (int s = 0; s < n; ++s) {
                    int other = flat + (s - own) * stride;
                    if (a < up) v += gamma(own, k, s) * t0[other];
                    else v -= gamma(s, k, own) * t0[other];
                }
            }
            out[k * sz + flat] = v;
        }
    }
    return out;
}

Eigen::VectorXd nabla_2tensor(const Eigen::MatrixXd& w, const std::vector<Eigen::MatrixXd>& dw, const Christoffel& gamma) {
    const int n = gamma.n;
    Eigen::VectorXd out(n * n * n);
    for (int k = 0; k < n; ++k)
        for (int b = 0; b < n; ++b)
            for (int c = 0; c < n; ++c) {
                double v = dw[static_cast<std::size_t>(k)](b, c);
                for (int s = 0; s < n; ++s) v -= gamma(s, k, b) * w(s, c) + gamma(s, k, c) * w(b, s);
                out[(k * n + b) * n + c] = v;
            }
    return out;
}

ExprMatrix lie_derivative_metric(const VectorField& v, const ExprMatrix& g) {
    const int n = g.rows();
    ExprMatrix out(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            std::vector<Expr> t;
            for (int s = 0; s < n; ++s) {
                t.push_back(v[s] * g(i, j).diff(s));
                t.push_back(g(i, s) * v[s].diff(j));
                t.push_back(g(j, s) * v[s].diff(i));
            }
            out(i, j) = make_sum(std::move(t));
        }
    return out;
}

}  // namespace flatform
