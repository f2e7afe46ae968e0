#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace flatform {

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    double width() const { return hi - lo; }
    double mid() const { return 0.5 * (lo + hi); }
    bool contains(double v, double slack = 0.0) const { return v >= lo - slack && v <= hi + slack; }
};

using Box = std::vector<Interval>;

double diameter(const Box& box);
bool box_contains(const Box& box, const Eigen::VectorXd& p, double slack = 0.0);
// Box grown by `factor` times the half-width on each side.
Box inflate(const Box& box, double factor);

// Coordinate chart: names, domain box and base point.
class Chart {
public:
    Chart() = default;
    Chart(std::vector<std::string> names, Box box, Eigen::VectorXd base);
    // Base point defaults to the box centre.
    Chart(std::vector<std::string> names, Box box);

    int dim() const { return static_cast<int>(names_.size()); }
    const std::vector<std::string>& names() const { return names_; }
    const Box& box() const { return box_; }
    const Eigen::VectorXd& base() const { return base_; }
    double diameter() const { return flatform::diameter(box_); }
    int index_of(const std::string& name) const;  // -1 when absent

private:
    std::vector<std::string> names_;
    Box box_;
    Eigen::VectorXd base_;
};

// A point tied to its chart; construction checks dimension and box membership.
class Point {
public:
    Point(const Chart& chart, Eigen::VectorXd coords);
    const Chart& chart() const { return *chart_; }
    const Eigen::VectorXd& coords() const { return x_; }
    double operator[](int i) const { return x_[i]; }

private:
    const Chart* chart_;
    Eigen::VectorXd x_;
};

// Axis-uniform grid including the box corners, `per_axis` nodes per axis.
class Grid {
public:
    Grid(const Box& box, int per_axis);
    int dim() const { return static_cast<int>(axes_.size()); }
    int per_axis() const { return per_axis_; }
    std::size_t size() const { return points_.size(); }
    const Eigen::VectorXd& operator[](std::size_t i) const { return points_[i]; }
    const std::vector<Eigen::VectorXd>& points() const { return points_; }
    const std::vector<std::vector<double>>& axes() const { return axes_; }
    // Flat index of the multi-index (row-major, last axis fastest).
    std::size_t index(const std::vector<int>& multi) const;
    const Box& box() const { return box_; }
    double diameter() const { return flatform::diameter(box_); }

private:
    Box box_;
    int per_axis_;
    std::vector<std::vector<double>> axes_;
    std::vector<Eigen::VectorXd> points_;
};

// Default analysis grid resolution per axis for dimension n.
int default_grid_per_axis(int n);

}  // namespace flatform
