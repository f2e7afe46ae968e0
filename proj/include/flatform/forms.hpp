#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "flatform/chart.hpp"
#include "flatform/expr.hpp"

namespace flatform {

// Dense matrix of expressions, row-major.
class ExprMatrix {
public:
    ExprMatrix() = default;
    ExprMatrix(int rows, int cols) : rows_(rows), cols_(cols), e_(static_cast<std::size_t>(rows * cols)) {}
    static ExprMatrix square(int n) { return ExprMatrix(n, n); }

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    Expr& operator()(int i, int j) { return e_[static_cast<std::size_t>(i * cols_ + j)]; }
    const Expr& operator()(int i, int j) const { return e_[static_cast<std::size_t>(i * cols_ + j)]; }
    bool all_zero() const;
    ExprMatrix transpose() const;

private:
    int rows_ = 0, cols_ = 0;
    std::vector<Expr> e_;
};

using VectorField = std::vector<Expr>;
using CovectorField = std::vector<Expr>;

// Compiled evaluator for an expression matrix.
class CompiledMatrix {
public:
    CompiledMatrix() = default;
    explicit CompiledMatrix(const ExprMatrix& m);
    Eigen::MatrixXd operator()(const Eigen::VectorXd& x) const;
    int rows() const { return rows_; }
    int cols() const { return cols_; }

private:
    int rows_ = 0, cols_ = 0;
    std::vector<CompiledExpr> e_;
    std::vector<int> nonzero_;
};

// A square expression matrix together with its first partial derivatives.
class MatrixJet {
public:
    MatrixJet() = default;
    explicit MatrixJet(const ExprMatrix& m);
    int dim() const { return n_; }
    bool is_zero() const { return zero_; }
    const ExprMatrix& expr() const { return m_; }
    Eigen::MatrixXd value(const Eigen::VectorXd& x) const { return val_(x); }
    // d[k] = ∂_k M at x.
    std::vector<Eigen::MatrixXd> grad(const Eigen::VectorXd& x) const;

private:
    int n_ = 0;
    bool zero_ = true;
    ExprMatrix m_;
    CompiledMatrix val_;
    std::vector<CompiledMatrix> d_;
};

// General bilinear form B = g + ω over a chart.
class BilinearFormField {
public:
    BilinearFormField(Chart chart, ExprMatrix entries);
    // Parses an n×n table of expression strings.
    static BilinearFormField parse(Chart chart, const std::vector<std::vector<std::string>>& rows);

    const Chart& chart() const { return chart_; }
    int dim() const { return chart_.dim(); }
    const ExprMatrix& entries() const { return b_; }
    const ExprMatrix& sym() const { return g_; }
    const ExprMatrix& skew() const { return w_; }

private:
    Chart chart_;
    ExprMatrix b_, g_, w_;
};

// g = (B+Bᵀ)/2, ω = (B−Bᵀ)/2, with exact shortcuts when entries are
// structurally symmetric or antisymmetric so that g + ω recomposes B.
std::pair<ExprMatrix, ExprMatrix> split(const ExprMatrix& b);

struct DOmegaTerm {
    int i, j, k;  // i < j < k
    Expr value;   // ∂_k ω_ij + ∂_i ω_jk + ∂_j ω_ki
};
std::vector<DOmegaTerm> exterior_derivative_2form(const ExprMatrix& w);
// (dθ)_ij = ∂_i θ_j − ∂_j θ_i
ExprMatrix exterior_derivative_1form(const CovectorField& theta);
// Grid max of |dω| over all triples.
double closedness_residual(const ExprMatrix& w, const Grid& grid);

VectorField lie_bracket(const VectorField& u, const VectorField& v);

// Coordinate map. Kind::Coordinates maps x (original) → y (new coordinates),
// Kind::Parametrization maps y → x. Either way a sample returns both points
// and the Jacobian dx/dy used to pull forms back to the y-chart.
class ChartMap {
public:
    enum class Kind { Coordinates, Parametrization };
    struct Sample {
        Eigen::VectorXd x;
        Eigen::VectorXd y;
        Eigen::MatrixXd dx_dy;
    };
    using Sampler = std::function<Sample(const Eigen::VectorXd& q)>;

    ChartMap() = default;
    ChartMap(Kind kind, Box domain, Eigen::VectorXd domain_base, Sampler sampler, std::string description);

    // y_i = coords[i](x) over the chart variables.
    static ChartMap coordinates(const Chart& chart, const std::vector<Expr>& coords, std::string description = {});
    // x_i = params[i](y) with y ranging over `param_chart`.
    static ChartMap parametrization(const Chart& param_chart, const std::vector<Expr>& params,
                                    std::string description = {});
    // Wraps a plain map with a central-difference Jacobian (step h_rel·diam).
    static ChartMap from_function(Kind kind, Box domain, Eigen::VectorXd domain_base,
                                  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> f, double h_rel,
                                  std::string description = {});

    Kind kind() const { return kind_; }
    int dim() const { return static_cast<int>(domain_.size()); }
    const Box& domain() const { return domain_; }
    const Eigen::VectorXd& domain_base() const { return base_; }
    const std::string& description() const { return description_; }
    Sample sample(const Eigen::VectorXd& q) const { return sampler_(q); }

    // min |det dx/dy| (Parametrization) or min |det dy/dx| (Coordinates) on a
    // grid of the domain; throws if below jac_min.
    double certify(int per_axis, double jac_min);
    double certificate() const { return min_det_; }
    int certificate_grid() const { return cert_grid_; }

private:
    Kind kind_ = Kind::Coordinates;
    Box domain_;
    Eigen::VectorXd base_;
    Sampler sampler_;
    std::string description_;
    double min_det_ = -1.0;
    int cert_grid_ = 0;
};

// Central-difference Jacobian of f at x, step h.
Eigen::MatrixXd fd_jacobian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
                            const Eigen::VectorXd& x, double h);

// Jᵀ B(x) J where (x, J=dx/dy) come from the chart-map sample at q.
Eigen::MatrixXd pullback(const CompiledMatrix& b, const ChartMap& phi, const Eigen::VectorXd& q);
Eigen::MatrixXd pullback(const Eigen::MatrixXd& b_at_x, const Eigen::MatrixXd& dx_dy);

}  // namespace flatform
