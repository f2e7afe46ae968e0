#include "flatform/chart.hpp"

#include <cmath>
#include <set>
#include <stdexcept>

namespace flatform {

double diameter(const Box& box) {
    double s = 0;
    for (const auto& iv : box) s += iv.width() * iv.width();
    return std::sqrt(s);
}

bool box_contains(const Box& box, const Eigen::VectorXd& p, double slack) {
    if (p.size() != static_cast<Eigen::Index>(box.size())) return false;
    for (std::size_t i = 0; i < box.size(); ++i)
        if (!box[i].contains(p[static_cast<Eigen::Index>(i)], slack * box[i].width())) return false;
    return true;
}

Box inflate(const Box& box, double factor) {
    Box out = box;
    for (auto& iv : out) {
        double h = 0.5 * iv.width() * factor;
        iv.lo -= h;
        iv.hi += h;
    }
    return out;
}

namespace {

void check_names(const std::vector<std::string>& names) {
    std::set<std::string> seen;
    static const std::set<std::string> reserved{"sin", "cos", "exp", "ln", "sqrt"};
    for (const auto& n : names) {
        if (n.empty() || !(std::isalpha(static_cast<unsigned char>(n[0])) || n[0] == '_'))
            throw std::invalid_argument("invalid variable name '" + n + "'");
        for (char c : n)
            if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_'))
                throw std::invalid_argument("invalid variable name '" + n + "'");
        if (reserved.count(n)) throw std::invalid_argument("variable name '" + n + "' is a function name");
        if (!seen.insert(n).second) throw std::invalid_argument("duplicate variable name '" + n + "'");
    }
}

Eigen::VectorXd centre(const Box& box) {
    Eigen::VectorXd c(box.size());
    for (std::size_t i = 0; i < box.size(); ++i) c[static_cast<Eigen::Index>(i)] = box[i].mid();
    return c;
}

}  // namespace

Chart::Chart(std::vector<std::string> names, Box box, Eigen::VectorXd base)
    : names_(std::move(names)), box_(std::move(box)), base_(std::move(base)) {
    check_names(names_);
    if (names_.empty()) throw std::invalid_argument("chart needs at least one coordinate");
    if (box_.size() != names_.size()) throw std::invalid_argument("box dimension does not match variable count");
    for (const auto& iv : box_)
        if (!(iv.hi > iv.lo) || !std::isfinite(iv.lo) || !std::isfinite(iv.hi))
            throw std::invalid_argument("degenerate box interval");
    if (base_.size() != dim()) throw std::invalid_argument("base point dimension mismatch");
    if (!box_contains(box_, base_)) throw std::invalid_argument("base point outside box");
}

Chart::Chart(std::vector<std::string> names, Box box) : Chart(names, box, centre(box)) {}

int Chart::index_of(const std::string& name) const {
    for (std::size_t i = 0; i < names_.size(); ++i)
        if (names_[i] == name) return static_cast<int>(i);
    return -1;
}

Point::Point(const Chart& chart, Eigen::VectorXd coords) : chart_(&chart), x_(std::move(coords)) {
    if (x_.size() != chart.dim()) throw std::invalid_argument("point dimension does not match chart");
    if (!box_contains(chart.box(), x_)) throw std::invalid_argument("point outside chart box");
}

Grid::Grid(const Box& box, int per_axis) : box_(box), per_axis_(per_axis) {
    if (per_axis < 2) throw std::invalid_argument("grid needs at least 2 nodes per axis");
    const int n = static_cast<int>(box.size());
    for (const auto& iv : box) {
        std::vector<double> ax(per_axis);
        for (int k = 0; k < per_axis; ++k) ax[k] = iv.lo + (iv.hi - iv.lo) * k / (per_axis - 1);
        ax.back() = iv.hi;
        axes_.push_back(std::move(ax));
    }
    std::size_t total = 1;
    for (int i = 0; i < n; ++i) total *= static_cast<std::size_t>(per_axis);
    points_.reserve(total);
    std::vector<int> m(n, 0);
    for (std::size_t t = 0; t < total; ++t) {
        Eigen::VectorXd p(n);
        for (int i = 0; i < n; ++i) p[i] = axes_[i][m[i]];
        points_.push_back(std::move(p));
        for (int i = n - 1; i >= 0; --i) {
            if (++m[i] < per_axis) break;
            m[i] = 0;
        }
    }
}

std::size_t Grid::index(const std::vector<int>& multi) const {
    std::size_t idx = 0;
    for (int v : multi) idx = idx * static_cast<std::size_t>(per_axis_) + static_cast<std::size_t>(v);
    return idx;
}

int default_grid_per_axis(int n) {
    if (n <= 2) return 9;
    if (n == 3) return 7;
    return 5;
}

}  // namespace flatform
