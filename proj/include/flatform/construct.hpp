#pragma once

#include <Eigen/Dense>
#include <functional>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "flatform/config.hpp"
#include "flatform/connection.hpp"
#include "flatform/forms.hpp"
#include "flatform/kernel.hpp"
#include "flatform/ode.hpp"

namespace flatform {

class ConstructionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Diagnostic {
    std::string name;
    double value = 0.0;
    double tol = 0.0;
    bool pass = true;
};

class ParallelCovector;

struct FlatChartResult {
    std::string method;
    ChartMap chart;
    Eigen::MatrixXd C;                // constant target matrix
    std::vector<double> deviation;    // per certification-grid point
    double max_deviation = 0.0;
    int certify_grid = 0;
    // Flat functions of the symmetric part (when applicable), sampled on the
    // certification grid of the original chart, and their coefficient matrix.
    int m = 0;
    Eigen::MatrixXd c;
    std::vector<Eigen::VectorXd> f_values;
    std::shared_ptr<const ParallelCovector> covectors;
    std::vector<Diagnostic> diagnostics;
    std::vector<std::string> notes;
    int box_shrinks = 0;
};

struct VerifyResult {
    Eigen::MatrixXd C;
    std::vector<double> deviation;
    double max_deviation = 0.0;
};

// C = pullback at the chart-map base; deviations over the grid of the
// map's domain.
VerifyResult verify_flat_chart(const CompiledMatrix& b, const ChartMap& phi, int per_axis);
VerifyResult verify_flat_chart(const MatrixFn& b, const ChartMap& phi, int per_axis);

// Transport of covectors parallel for the g-connection, integrated in the
// reduced (free) components with the completion u_pivot = u_free·F(x).
class CovectorTransport {
public:
    CovectorTransport(const MatrixJet& g, const Eigen::VectorXd& base, const Tolerances& tol);
    CovectorTransport(const CovectorTransport&) = delete;
    CovectorTransport& operator=(const CovectorTransport&) = delete;
    int dim() const { return n_; }
    int rank() const { return m_; }
    const KernelData& base_kernel() const { return k0_; }
    const Eigen::VectorXd& base() const { return base_; }
    KernelData kernel(const Eigen::VectorXd& x) const;
    Christoffel gamma(const Eigen::VectorXd& x) const { return sys_.solve(x).gamma; }
    // Rows of U_free (k×m) completed to full covectors (k×n).
    Eigen::MatrixXd complete(const Eigen::VectorXd& x, const Eigen::MatrixXd& u_free) const;
    // ∂_d u_i = Σ_{s,j} Γ^s_ij u_s d^j for every row of U (full covectors).
    static Eigen::MatrixXd rate(const Christoffel& G, const Eigen::MatrixXd& u, const Eigen::VectorXd& d);
    Eigen::MatrixXd free_part(const Eigen::MatrixXd& u_full) const;
    const Tolerances& tol() const { return tol_; }

private:
    MatrixJet g_;
    ConnectionSystem sys_;
    Eigen::VectorXd base_;
    int n_, m_;
    KernelData k0_;
    Tolerances tol_;
};

// Parallel covectors u^(c) (rows) from initial free components U0 (k×m) at
// the base, with potentials f^(c), f(base) = 0. Values along axis-parallel
// paths in axis order 0..n−1.
class ParallelCovector {
public:
    ParallelCovector(std::shared_ptr<const CovectorTransport> t, Eigen::MatrixXd u0_free);

    struct Value {
        Eigen::MatrixXd u;   // k×n full covectors
        Eigen::VectorXd f;   // k potentials
    };
    Value value(const Eigen::VectorXd& x) const;
    // Axis-parallel tree sweep over a grid; node values in grid order.
    std::vector<Value> sweep(const Grid& grid, const std::vector<int>& axis_order) const;
    // Max over grid rectangles of |u| and |f| mismatch between the two edge orders.
    double loop_defect(const Grid& grid) const;
    // Max |u| mismatch between the axis orders 0..n−1 and n−1..0 on the grid.
    double reorder_defect(const Grid& grid) const;
    const CovectorTransport& transport() const { return *t_; }
    int count() const { return static_cast<int>(u0_.rows()); }
    const Eigen::MatrixXd& initial() const { return u0_; }

private:
    std::shared_ptr<const CovectorTransport> t_;
    Eigen::MatrixXd u0_;
    OdeState pack(const Value& v) const;
    Value unpack(const Eigen::VectorXd& x, const OdeState& s) const;
    // Integrates along axis `a` from x (state s) to each coordinate in `targets`.
    std::vector<OdeState> along_axis(const Eigen::VectorXd& x, const OdeState& s, int a, const std::vector<double>& targets) const;
};

int default_loop_grid(int n);

FlatChartResult flat_chart_symmetric(const MatrixJet& g, const Chart& chart, const Tolerances& tol, int certify_grid);

// 2-form field with first derivatives, as plain callbacks.
struct TwoFormField {
    int n = 0;
    std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> value;
    std::function<std::vector<Eigen::MatrixXd>(const Eigen::VectorXd&)> grad;
    static TwoFormField from(const MatrixJet& w);
};

// Linear map A with Aᵀ ω₀ A = Σ dx^{2i−1}∧dx^{2i}; A = I when ω₀ is canonical.
Eigen::MatrixXd symplectic_basis(const Eigen::MatrixXd& w0);
Eigen::MatrixXd canonical_symplectic(int n);

FlatChartResult darboux_symplectic(const TwoFormField& w, const Box& box, const Eigen::VectorXd& base, const Tolerances& tol,
                                   int certify_grid);
FlatChartResult darboux_degenerate(const MatrixJet& w, const Box& box, const Eigen::VectorXd& base, const Tolerances& tol,
                                   int certify_grid);
FlatChartResult joint_flat_chart(const MatrixJet& g, const MatrixJet& w, const Box& box, const Eigen::VectorXd& base,
                                 const Tolerances& tol, int certify_grid);

}  // namespace flatform
