#pragma once

#include <functional>
#include <vector>

namespace flatform {

using OdeState = std::vector<double>;
using OdeRhs = std::function<void(const OdeState& y, OdeState& dy, double t)>;

struct OdeOptions {
    double atol = 1e-10;
    double rtol = 1e-8;
};

// Adaptive Dormand–Prince integration from t0; returns the state at each of
// `times`, which must be monotone away from t0 (either direction).
std::vector<OdeState> integrate_times(const OdeRhs& f, const OdeState& y0, double t0, const std::vector<double>& times,
                                      const OdeOptions& opt);
OdeState integrate(const OdeRhs& f, const OdeState& y0, double t0, double t1, const OdeOptions& opt);

// Gauss–Legendre nodes/weights on [0,1].
void gauss_legendre01(int n, std::vector<double>& nodes, std::vector<double>& weights);

}  // namespace flatform
