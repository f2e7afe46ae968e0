#include "flatform/forms.hpp"

#include <cmath>
#include <stdexcept>

namespace flatform {

bool ExprMatrix::all_zero() const {
    for (const auto& e : e_)
        if (!e.is_zero()) return false;
    return true;
}

ExprMatrix ExprMatrix::transpose() const {
    ExprMatrix t(cols_, rows_);
    for (int i = 0; i < rows_; ++i)
        for (int j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
}

CompiledMatrix::CompiledMatrix(const ExprMatrix& m) : rows_(m.rows()), cols_(m.cols()) {
    for (int i = 0; i < rows_; ++i)
        for (int j = 0; j < cols_; ++j) {
            e_.emplace_back(m(i, j));
            if (!m(i, j).is_zero()) nonzero_.push_back(i * cols_ + j);
        }
}

Eigen::MatrixXd CompiledMatrix::operator()(const Eigen::VectorXd& x) const {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(rows_, cols_);
    for (int idx : nonzero_) out(idx / cols_, idx % cols_) = e_[static_cast<std::size_t>(idx)](x.data());
    return out;
}

MatrixJet::MatrixJet(const ExprMatrix& m) : n_(m.rows()), zero_(m.all_zero()), m_(m), val_(m) {
    for (int k = 0; k < n_; ++k) {
        ExprMatrix d(m.rows(), m.cols());
        for (int i = 0; i < m.rows(); ++i)
            for (int j = 0; j < m.cols(); ++j) d(i, j) = m(i, j).diff(k);
        d_.emplace_back(d);
    }
}

std::vector<Eigen::MatrixXd> MatrixJet::grad(const Eigen::VectorXd& x) const {
    std::vector<Eigen::MatrixXd> out;
    out.reserve(d_.size());
    for (const auto& d : d_) out.push_back(d(x));
    return out;
}

std::pair<ExprMatrix, ExprMatrix> split(const ExprMatrix& b) {
    if (b.rows() != b.cols()) throw std::invalid_argument("split: matrix must be square");
    const int n = b.rows();
    ExprMatrix g(n, n), w(n, n);
    const Expr half(Rational(1, 2));
    for (int i = 0; i < n; ++i) {
        g(i, i) = b(i, i);
        for (int j = i + 1; j < n; ++j) {
            const Expr &a = b(i, j), &c = b(j, i);
            if (structurally_equal(a, c)) {
                g(i, j) = g(j, i) = a;
            } else if (structurally_equal(c, -a)) {
                w(i, j) = a;
                w(j, i) = c;
            } else {
                Expr s = half * (a + c), d = half * (a - c);
                g(i, j) = g(j, i) = s;
                w(i, j) = d;
                w(j, i) = -d;
            }
        }
    }
    return {g, w};
}

BilinearFormField::BilinearFormField(Chart chart, ExprMatrix entries) : chart_(std::move(chart)), b_(std::move(entries)) {
    const int n = chart_.dim();
    if (b_.rows() != n || b_.cols() != n) throw std::invalid_argument("form matrix must be n×n for the chart dimension");
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (b_(i, j).max_var() >= n) throw std::invalid_argument("form entry uses a variable outside the chart");
    std::tie(g_, w_) = split(b_);
}

BilinearFormField BilinearFormField::parse(Chart chart, const std::vector<std::vector<std::string>>& rows) {
    const int n = chart.dim();
    if (static_cast<int>(rows.size()) != n) throw std::invalid_argument("form must have n rows");
    ExprMatrix m(n, n);
    for (int i = 0; i < n; ++i) {
        if (static_cast<int>(rows[i].size()) != n) throw std::invalid_argument("form row " + std::to_string(i) + " must have n entries");
        for (int j = 0; j < n; ++j) m(i, j) = flatform::parse(rows[i][j], chart.names());
    }
    return BilinearFormField(std::move(chart), std::move(m));
}

std::vector<DOmegaTerm> exterior_derivative_2form(const ExprMatrix& w) {
    const int n = w.rows();
    std::vector<DOmegaTerm> out;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            for (int k = j + 1; k < n; ++k)
                out.push_back({i, j, k, make_sum({w(i, j).diff(k), w(j, k).diff(i), w(k, i).diff(j)})});
    return out;
}

ExprMatrix exterior_derivative_1form(const CovectorField& theta) {
    const int n = static_cast<int>(theta.size());
    ExprMatrix d(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (i != j) d(i, j) = theta[j].diff(i) - theta[i].diff(j);
    return d;
}

double closedness_residual(const ExprMatrix& w, const Grid& grid) {
    double worst = 0.0;
    for (const auto& t : exterior_derivative_2form(w)) {
        if (t.value.is_zero()) continue;
        CompiledExpr c(t.value);
        for (const auto& p : grid.points()) worst = std::max(worst, std::abs(c(p.data())));
    }
    return worst;
}

VectorField lie_bracket(const VectorField& u, const VectorField& v) {
    if (u.size() != v.size()) throw std::invalid_argument("lie_bracket: dimension mismatch");
    const int n = static_cast<int>(u.size());
    VectorField out(n);
    for (int i = 0; i < n; ++i) {
        std::vector<Expr> t;
        for (int s = 0; s < n; ++s) {
            t.push_back(u[s] * v[i].diff(s));
            t.push_back(-(v[s] * u[i].diff(s)));
        }
        out[i] = make_sum(std::move(t));
    }
    return out;
}

// ---------------------------------------------------------------- ChartMap

ChartMap::ChartMap(Kind kind, Box domain, Eigen::VectorXd domain_base, Sampler sampler, std::string description)
    : kind_(kind), domain_(std::move(domain)), base_(std::move(domain_base)), sampler_(std::move(sampler)),
      description_(std::move(description)) {}

namespace {

struct ClosedForm {
    std::vector<CompiledExpr> f;
    std::vector<CompiledExpr> df;  // row-major n×n, df[i*n+k] = ∂f_i/∂v_k
};

std::shared_ptr<ClosedForm> compile_map(const std::vector<Expr>& f, int n) {
    if (static_cast<int>(f.size()) != n) throw std::invalid_argument("chart map needs n component expressions");
    auto cf = std::make_shared<ClosedForm>();
    for (int i = 0; i < n; ++i) {
        if (f[i].max_var() >= n) throw std::invalid_argument("chart map expression uses an undeclared variable");
        cf->f.emplace_back(f[i]);
        for (int k = 0; k < n; ++k) cf->df.emplace_back(f[i].diff(k));
    }
    return cf;
}

void eval_map(const ClosedForm& cf, const Eigen::VectorXd& v, Eigen::VectorXd& out, Eigen::MatrixXd& jac) {
    const int n = static_cast<int>(v.size());
    out.resize(n);
    jac.resize(n, n);
    for (int i = 0; i < n; ++i) {
        out[i] = cf.f[i](v.data());
        for (int k = 0; k < n; ++k) jac(i, k) = cf.df[i * n + k](v.data());
    }
}

}  // namespace

ChartMap ChartMap::coordinates(const Chart& chart, const std::vector<Expr>& coords, std::string description) {
    auto cf = compile_map(coords, chart.dim());
    Sampler s = [cf](const Eigen::VectorXd& x) {
        Sample out;
        out.x = x;
        Eigen::MatrixXd dy_dx;
        eval_map(*cf, x, out.y, dy_dx);
        Eigen::FullPivLU<Eigen::MatrixXd> lu(dy_dx);
        if (!lu.isInvertible()) throw std::runtime_error("chart map Jacobian singular");
        out.dx_dy = lu.inverse();
        return out;
    };
    return ChartMap(Kind::Coordinates, chart.box(), chart.base(), std::move(s), std::move(description));
}

ChartMap ChartMap::parametrization(const Chart& param_chart, const std::vector<Expr>& params, std::string description) {
    auto cf = compile_map(params, param_chart.dim());
    Sampler s = [cf](const Eigen::VectorXd& y) {
        Sample out;
        out.y = y;
        eval_map(*cf, y, out.x, out.dx_dy);
        return out;
    };
    return ChartMap(Kind::Parametrization, param_chart.box(), param_chart.base(), std::move(s), std::move(description));
}

Eigen::MatrixXd fd_jacobian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
                            double h) {
    const int n = static_cast<int>(x.size());
    Eigen::MatrixXd j;
    for (int k = 0; k < n; ++k) {
        Eigen::VectorXd a = x, b = x;
        a[k] += h;
        b[k] -= h;
        Eigen::VectorXd col = (f(a) - f(b)) / (2 * h);
        if (k == 0) j.resize(col.size(), n);
        j.col(k) = col;
    }
    return j;
}

ChartMap ChartMap::from_function(Kind kind, Box domain, Eigen::VectorXd domain_base,
                                 std::function<Eigen::VectorXd(const Eigen::VectorXd&)> f, double h_rel,
                                 std::string description) {
    const double h = h_rel * diameter(domain);
    Sampler s = [kind, f, h](const Eigen::VectorXd& q) {
        Sample out;
        Eigen::MatrixXd jac = fd_jacobian(f, q, h);
        if (kind == Kind::Parametrization) {
            out.y = q;
            out.x = f(q);
            out.dx_dy = jac;
        } else {
            out.x = q;
            out.y = f(q);
            Eigen::FullPivLU<Eigen::MatrixXd> lu(jac);
            if (!lu.isInvertible()) throw std::runtime_error("chart map Jacobian singular");
            out.dx_dy = lu.inverse();
        }
        return out;
    };
    return ChartMap(kind, std::move(domain), std::move(domain_base), std::move(s), std::move(description));
}

double ChartMap::certify(int per_axis, double jac_min) {
    Grid grid(domain_, per_axis);
    double worst = std::numeric_limits<double>::infinity();
    for (const auto& q : grid.points()) {
        Sample s = sample(q);
        double d = std::abs(s.dx_dy.determinant());
        if (kind_ == Kind::Coordinates) d = d > 0 ? 1.0 / d : 0.0;
        worst = std::min(worst, d);
    }
    min_det_ = worst;
    cert_grid_ = per_axis;
    if (!(worst >= jac_min))
        throw std::runtime_error("chart map not certified invertible: min |det J| = " + std::to_string(worst));
    return worst;
}

Eigen::MatrixXd pullback(const Eigen::MatrixXd& b_at_x, const Eigen::MatrixXd& dx_dy) {
    return dx_dy.transpose() * b_at_x * dx_dy;
}

Eigen::MatrixXd pullback(const CompiledMatrix& b, const ChartMap& phi, const Eigen::VectorXd& q) {
    ChartMap::Sample s = phi.sample(q);
    return pullback(b(s.x), s.dx_dy);
}

}  // namespace flatform
