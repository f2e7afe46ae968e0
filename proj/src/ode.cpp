#include "flatform/ode.hpp"

#include <boost/numeric/odeint.hpp>
#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace flatform {

namespace odeint = boost::numeric::odeint;

std::vector<OdeState> integrate_times(const OdeRhs& f, const OdeState& y0, double t0, const std::vector<double>& times,
                                      const OdeOptions& opt) {
    std::vector<OdeState> out;
    out.reserve(times.size());
    for (double t : times)
        if (!std::isfinite(t)) throw std::runtime_error("non-finite integration time");
    for (double v : y0)
        if (!std::isfinite(v)) throw std::runtime_error("non-finite initial state");
    if (y0.empty()) return std::vector<OdeState>(times.size(), y0);  // nothing to transport
    std::vector<double> ts;
    ts.push_back(t0);
    // Targets within roundoff of t0 get one Euler step; the dense-output
    // driver would interpolate before its first step otherwise.
    const double eps = 1e-12 * std::max(1.0, std::abs(t0));
    OdeState dy0;
    for (double t : times) {
        if (ts.size() == 1 && std::abs(t - t0) <= eps) {
            if (dy0.empty()) {
                dy0.resize(y0.size());
                f(y0, dy0, t0);
            }
            OdeState y = y0;
            for (std::size_t i = 0; i < y.size(); ++i) y[i] += (t - t0) * dy0[i];
            out.push_back(std::move(y));
            continue;
        }
        ts.push_back(t);
    }
    if (ts.size() == 1) return out;
    const double span = ts.back() - t0;
    double dt = span / 8.0;
    auto stepper = odeint::make_dense_output(opt.atol, opt.rtol, odeint::runge_kutta_dopri5<OdeState>());
    OdeState y = y0;
    auto sys = [&f](const OdeState& s, OdeState& ds, double t) { f(s, ds, t); };
    std::size_t idx = 0;
    odeint::integrate_times(stepper, sys, y, ts.begin(), ts.end(), dt, [&](const OdeState& s, double) {
        if (idx++ > 0) out.push_back(s);
    });
    if (out.size() != times.size()) throw std::runtime_error("ODE integration returned an unexpected number of states");
    return out;
}

OdeState integrate(const OdeRhs& f, const OdeState& y0, double t0, double t1, const OdeOptions& opt) {
    if (t1 == t0) return y0;
    return integrate_times(f, y0, t0, {t1}, opt).front();
}

void gauss_legendre01(int n, std::vector<double>& nodes, std::vector<double>& weights) {
    nodes.assign(static_cast<std::size_t>(n), 0.0);
    weights.assign(static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < n; ++i) {
        double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double dp = 0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1, p1 = x;
            for (int k = 2; k <= n; ++k) {
                double p2 = ((2.0 * k - 1) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1);
            double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        // recompute derivative at the converged node
        double p0 = 1, p1 = x;
        for (int k = 2; k <= n; ++k) {
            double p2 = ((2.0 * k - 1) * x * p1 - (k - 1.0) * p0) / k;
            p0 = p1;
            p1 = p2;
        }
        dp = n * (x * p1 - p0) / (x * x - 1);
        nodes[static_cast<std::size_t>(n - 1 - i)] = 0.5 * (x + 1);
        weights[static_cast<std::size_t>(n - 1 - i)] = 1.0 / ((1 - x * x) * dp * dp);
    }
}

}  // namespace flatform
