#include "flatform/skew.hpp"

#include <cmath>

namespace flatform {

Eigen::MatrixXd invert_omega(const Eigen::MatrixXd& w, double cond_max) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(w);
    const auto& s = svd.singularValues();
    double lo = s[s.size() - 1];
    if (!(lo > 0) || s[0] / lo > cond_max)
        throw SingularOmega("ω is singular or ill-conditioned (cond = " + std::to_string(lo > 0 ? s[0] / lo : INFINITY) + ")");
    Eigen::MatrixXd P = w.partialPivLu().inverse();
    return 0.5 * (P - P.transpose());
}

double jacobi_at(const Eigen::MatrixXd& P, const std::vector<Eigen::MatrixXd>& dP) {
    const int n = static_cast<int>(P.rows());
    double worst = 0;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            for (int k = j + 1; k < n; ++k) {
                double v = 0;
                for (int s = 0; s < n; ++s)
                    v += P(s, k) * dP[s](i, j) + P(s, i) * dP[s](j, k) + P(s, j) * dP[s](k, i);
                worst = std::max(worst, std::abs(v));
            }
    return worst;
}

double jacobi_residual(const ExprMatrix& P, const Grid& grid) {
    MatrixJet jet(P);
    double worst = 0;
    for (const auto& p : grid.points()) worst = std::max(worst, jacobi_at(jet.value(p), jet.grad(p)));
    return worst;
}

double jacobi_residual_dual(const MatrixJet& w, const Grid& grid, double cond_max) {
    double worst = 0;
    for (const auto& p : grid.points()) {
        Eigen::MatrixXd P = invert_omega(w.value(p), cond_max);
        auto dw = w.grad(p);
        std::vector<Eigen::MatrixXd> dP;
        for (const auto& d : dw) dP.push_back(-P * d * P);
        worst = std::max(worst, jacobi_at(P, dP));
    }
    return worst;
}

double jacobi_residual_fd(const MatrixFn& P, const Grid& grid, double h) {
    double worst = 0;
    const int n = grid.dim();
    for (const auto& p : grid.points()) {
        std::vector<Eigen::MatrixXd> dP;
        for (int s = 0; s < n; ++s) {
            Eigen::VectorXd a = p, b = p;
            a[s] += h;
            b[s] -= h;
            dP.push_back((P(a) - P(b)) / (2 * h));
        }
        worst = std::max(worst, jacobi_at(P(p), dP));
    }
    return worst;
}

double poisson_bracket(const Eigen::VectorXd& df, const Eigen::VectorXd& dh, const Eigen::MatrixXd& P) {
    return df.dot(P * dh);
}

Eigen::VectorXd hamiltonian_field(const Eigen::MatrixXd& P, const Eigen::VectorXd& df) { return P.transpose() * df; }

VectorField hamiltonian_field(const ExprMatrix& P, const Expr& f) {
    const int n = P.rows();
    VectorField X(n);
    for (int i = 0; i < n; ++i) {
        std::vector<Expr> t;
        for (int s = 0; s < n; ++s) t.push_back(P(s, i) * f.diff(s));
        X[i] = make_sum(std::move(t));
    }
    return X;
}

double parallel1_residual(const MatrixJet& g, const MatrixJet& w, const GammaFn& gamma, const Grid& grid, double cond_max) {
    const int n = grid.dim();
    double worst = 0;
    for (const auto& p : grid.points()) {
        Eigen::MatrixXd G = g.value(p), W = w.value(p);
        Eigen::MatrixXd P = invert_omega(W, cond_max);
        Eigen::VectorXd nab = nabla_2tensor(W, w.grad(p), gamma(p));
        Eigen::MatrixXd L = G * P, Rm = P * G;
        for (int k = 0; k < n; ++k) {
            Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> N(nab.data() + k * n * n, n, n);
            worst = std::max(worst, (L * N * Rm).cwiseAbs().maxCoeff());
        }
    }
    return worst;
}

double parallelPg_residual(const MatrixJet& g, const MatrixJet& w, const Grid& grid, double cond_max) {
    const int n = grid.dim();
    ChristoffelFirst cf(g.expr());
    double worst = 0;
    for (const auto& p : grid.points()) {
        Eigen::MatrixXd G = g.value(p), W = w.value(p);
        Eigen::MatrixXd P = invert_omega(W, cond_max);
        auto dw = w.grad(p);
        std::vector<double> gf = cf.eval(p);
        Eigen::MatrixXd GP = G * P, PG = P * G;
        for (int k = 0; k < n; ++k) {
            Eigen::MatrixXd dP = -P * dw[static_cast<std::size_t>(k)] * P;
            Eigen::MatrixXd M = G.transpose() * dP * G;
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) {
                    double v = 0;
                    for (int s = 0; s < n; ++s)
                        v += GP(i, s) * gf[static_cast<std::size_t>((k * n + s) * n + j)] +
                             PG(s, j) * gf[static_cast<std::size_t>((k * n + s) * n + i)];
                    M(i, j) += v;
                }
            worst = std::max(worst, M.cwiseAbs().maxCoeff());
        }
    }
    return worst;
}

}  // namespace flatform
