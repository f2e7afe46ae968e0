#include "flatform/kernel.hpp"

#include <algorithm>
#include <cmath>

namespace flatform {

namespace {

int rank_from(const Eigen::VectorXd& s, double sigma_tol) {
    if (s.size() == 0 || s[0] == 0.0) return 0;
    int r = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i)
        if (s[i] > sigma_tol * s[0]) ++r;
    return r;
}

double condition(const Eigen::MatrixXd& m) {
    if (m.size() == 0) return 1.0;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    const auto& s = svd.singularValues();
    double lo = s[s.size() - 1];
    return lo > 0 ? s[0] / lo : std::numeric_limits<double>::infinity();
}

KernelData finish(const Eigen::MatrixXd& B, int m, std::vector<int> pivot, double cond_max) {
    const int n = static_cast<int>(B.rows());
    KernelData k;
    k.n = n;
    k.m = m;
    k.B = B;
    std::sort(pivot.begin(), pivot.end());
    std::vector<bool> is_piv(n, false);
    for (int p : pivot) is_piv[p] = true;
    for (int i = 0; i < n; ++i)
        if (!is_piv[i]) k.nonpivot.push_back(i);
    k.pivot = pivot;
    const int q = n - m;
    Eigen::MatrixXd b1(m, q), b2(q, q);
    for (int i = 0; i < m; ++i) b1.row(i) = B.row(k.nonpivot[i]);
    for (int i = 0; i < q; ++i) b2.row(i) = B.row(k.pivot[i]);
    k.pivot_condition = condition(b2);
    if (!(k.pivot_condition <= cond_max))
        throw KernelPivotError("kernel pivot block ill-conditioned: cond = " + std::to_string(k.pivot_condition));
    if (q > 0 && m > 0) k.F = -b1 * b2.inverse();
    else k.F = Eigen::MatrixXd::Zero(m, q);
    return k;
}

}  // namespace

int numeric_rank(const Eigen::MatrixXd& m, double sigma_tol) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    return rank_from(svd.singularValues(), sigma_tol);
}

Eigen::MatrixXd null_space(const Eigen::MatrixXd& m, double sigma_tol) {
    const Eigen::Index n = m.cols();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeFullV);
    int r = rank_from(svd.singularValues(), sigma_tol);
    return svd.matrixV().rightCols(n - r);
}

Eigen::MatrixXd intersection_kernel(const Eigen::MatrixXd& g, const Eigen::MatrixXd& w, double sigma_tol) {
    Eigen::MatrixXd st(g.rows() + w.rows(), g.cols());
    st << g, w;
    return null_space(st, sigma_tol);
}

RankProfile rank_profile(const MatrixFn& g, const MatrixFn& w, const Grid& grid, double sigma_tol) {
    RankProfile rp;
    rp.sigma_tol = sigma_tol;
    rp.grid_per_axis = grid.per_axis();
    const int n = grid.dim();
    for (const auto& p : grid.points()) {
        Eigen::MatrixXd gm = g(p), wm = w(p);
        rp.rank_g.push_back(numeric_rank(gm, sigma_tol));
        rp.rank_w.push_back(numeric_rank(wm, sigma_tol));
        Eigen::MatrixXd st(2 * n, n);
        st << gm, wm;
        rp.rank_intersection.push_back(n - numeric_rank(st, sigma_tol));
    }
    auto constant = [](const std::vector<int>& v) { return std::adjacent_find(v.begin(), v.end(), std::not_equal_to<>()) == v.end(); };
    rp.constant_g = constant(rp.rank_g);
    rp.constant_w = constant(rp.rank_w);
    rp.constant_intersection = constant(rp.rank_intersection);
    return rp;
}

KernelData kernel_basis(const Eigen::MatrixXd& m, double sigma_tol, double cond_max) {
    const int n = static_cast<int>(m.rows());
    Eigen::MatrixXd B = null_space(m, sigma_tol);
    const int q = static_cast<int>(B.cols());
    std::vector<int> pivot;
    if (q > 0) {
        Eigen::MatrixXd bt = B.transpose();
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(bt);
        const auto& perm = qr.colsPermutation().indices();
        for (int i = 0; i < q; ++i) pivot.push_back(perm[i]);
    }
    return finish(B, n - q, pivot, cond_max);
}

KernelData kernel_basis_fixed(const Eigen::MatrixXd& m, double sigma_tol, const std::vector<int>& pivot,
                              double cond_max) {
    const int n = static_cast<int>(m.rows());
    Eigen::MatrixXd B = null_space(m, sigma_tol);
    if (B.cols() != static_cast<Eigen::Index>(pivot.size()))
        throw KernelPivotError("kernel dimension changed along path (rank not constant)");
    return finish(B, n - static_cast<int>(pivot.size()), pivot, cond_max);
}

Eigen::VectorXd KernelData::complete(const Eigen::VectorXd& u_free) const {
    Eigen::VectorXd u(n);
    for (int i = 0; i < m; ++i) u[nonpivot[i]] = u_free[i];
    if (!pivot.empty()) {
        Eigen::VectorXd up = F.transpose() * u_free;
        for (std::size_t i = 0; i < pivot.size(); ++i) u[pivot[i]] = up[static_cast<Eigen::Index>(i)];
    }
    return u;
}

Eigen::MatrixXd align_basis(const Eigen::MatrixXd& b, const Eigen::MatrixXd& ref) {
    const Eigen::Index q = b.cols();
    if (ref.cols() != q || ref.rows() != b.rows()) return b;
    Eigen::MatrixXd out(b.rows(), q);
    std::vector<bool> used(static_cast<std::size_t>(q), false);
    for (Eigen::Index j = 0; j < q; ++j) {
        Eigen::Index best = -1;
        double bv = -1;
        for (Eigen::Index i = 0; i < q; ++i) {
            if (used[static_cast<std::size_t>(i)]) continue;
            double d = std::abs(b.col(i).dot(ref.col(j)));
            if (d > bv) { bv = d; best = i; }
        }
        used[static_cast<std::size_t>(best)] = true;
        double s = b.col(best).dot(ref.col(j)) < 0 ? -1.0 : 1.0;
        out.col(j) = s * b.col(best);
    }
    return out;
}

}  // namespace flatform
