#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "flatform/chart.hpp"
#include "flatform/forms.hpp"

namespace flatform {

// Γ^i_{jk}, stored densely; symmetric in (j,k) by construction.
struct Christoffel {
    int n = 0;
    std::vector<double> v;
    Christoffel() = default;
    explicit Christoffel(int dim) : n(dim), v(static_cast<std::size_t>(dim * dim * dim), 0.0) {}
    double& operator()(int i, int j, int k) { return v[static_cast<std::size_t>((i * n + j) * n + k)]; }
    double operator()(int i, int j, int k) const { return v[static_cast<std::size_t>((i * n + j) * n + k)]; }
};

using GammaFn = std::function<Christoffel(const Eigen::VectorXd&)>;

// Γ_{ij,s} = ½(∂_i g_js + ∂_j g_is − ∂_s g_ij), symbolic.
class ChristoffelFirst {
public:
    explicit ChristoffelFirst(const ExprMatrix& g);
    int dim() const { return n_; }
    const Expr& operator()(int i, int j, int s) const { return e_[static_cast<std::size_t>((i * n_ + j) * n_ + s)]; }
    // Numeric values, same index layout.
    std::vector<double> eval(const Eigen::VectorXd& x) const;

private:
    int n_;
    std::vector<Expr> e_;
    std::vector<CompiledExpr> c_;
};

inline ChristoffelFirst christoffel_first(const ExprMatrix& g) { return ChristoffelFirst(g); }

struct StationarityResult {
    bool holds = true;
    double max_violation = 0.0;
    std::vector<double> per_point;
};

// max_{v ∈ ker g, i, j} |Σ_s Γ_{ij,s} v^s| per grid point (orthonormal kernel basis).
StationarityResult stationarity_check(const ExprMatrix& g, const Grid& grid, double tol, double sigma_tol);

enum class Imposed { G, Omega, Joint };

// Pointwise least-norm solver for the stacked parallelism systems in the
// unknowns Γ^i_{(jk)}.
class ConnectionSystem {
public:
    struct Solution {
        Christoffel gamma;
        double residual_g = 0, residual_w = 0;
        double rhs_g = 0, rhs_w = 0;
        bool solvable_g = true, solvable_w = true;
        int rank = 0;
        bool solvable() const { return solvable_g && solvable_w; }
    };

    ConnectionSystem(const MatrixJet* g, const MatrixJet* w, double sigma_tol, double tol_lin);
    int dim() const { return n_; }
    Imposed imposed() const;
    Solution solve(const Eigen::VectorXd& x) const;
    GammaFn gamma_fn() const;

    double tol_lin() const { return tol_lin_; }
    int unknowns() const { return n_ * n_ * (n_ + 1) / 2; }
    int unknown_index(int i, int j, int k) const;

private:
    const MatrixJet* g_;
    const MatrixJet* w_;
    int n_;
    double sigma_tol_, tol_lin_;
};

// Per-grid-point solve summary.
struct SolvabilitySweep {
    double max_residual_g = 0, max_residual_w = 0;
    double max_ratio_g = 0, max_ratio_w = 0;  // residual / (tol_lin·(1+‖rhs‖))
    bool solvable_g = true, solvable_w = true;
    bool constant_rank = true;
    std::vector<int> ranks;
};
SolvabilitySweep sweep_solvability(const ConnectionSystem& sys, const Grid& grid);

// ∇T for a tensor with `up` contravariant then `down` covariant indices;
// T returns the flattened components (row-major in index order). Result is
// indexed [k][T indices]. ∂T by central differences, one Richardson step.
using TensorFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
Eigen::VectorXd covariant_derivative(const TensorFn& t, int up, int down, const Christoffel& gamma,
                                     const Eigen::VectorXd& x, double h);
// ∇_k ω_bc from values and exact partials; result[(k*n+b)*n+c].
Eigen::VectorXd nabla_2tensor(const Eigen::MatrixXd& w, const std::vector<Eigen::MatrixXd>& dw, const Christoffel& gamma);

ExprMatrix lie_derivative_metric(const VectorField& v, const ExprMatrix& g);

}  // namespace flatform
