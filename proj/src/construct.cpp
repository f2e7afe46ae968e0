#include <cmath>

#include "flatform/construct.hpp"

namespace flatform {

VerifyResult verify_flat_chart(const CompiledMatrix& b, const ChartMap& phi, int per_axis) {
    return verify_flat_chart(MatrixFn([&b](const Eigen::VectorXd& x) { return b(x); }), phi, per_axis);
}

VerifyResult verify_flat_chart(const MatrixFn& b, const ChartMap& phi, int per_axis) {
    auto at = [&](const Eigen::VectorXd& q) {
        ChartMap::Sample s = phi.sample(q);
        return pullback(b(s.x), s.dx_dy);
    };
    VerifyResult out;
    out.C = at(phi.domain_base());
    Grid grid(phi.domain(), per_axis);
    out.deviation.reserve(grid.size());
    for (const auto& q : grid.points()) {
        const double d = (at(q) - out.C).cwiseAbs().maxCoeff();
        out.deviation.push_back(d);
        out.max_deviation = std::max(out.max_deviation, d);
    }
    return out;
}

}  // namespace flatform
