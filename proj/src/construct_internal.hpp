#pragma once

#include <memory>

#include "flatform/construct.hpp"

namespace flatform::detail {

// Parallel covectors normalized so that g = Σ c_a (df^a)², c = diag(±1),
// positive entries first.
struct FlatCovectors {
    std::shared_ptr<const CovectorTransport> transport;
    std::shared_ptr<const ParallelCovector> pc;
    Eigen::MatrixXd c;
    int m = 0;
};
FlatCovectors flat_covectors(const MatrixJet& g, const Eigen::VectorXd& base, const Tolerances& tol);

// Caches samples by exact coordinates (certification and verification hit
// the same grid).
ChartMap::Sampler memoize(ChartMap::Sampler s);

// Thrown by flows that leave the permitted box or meet a degenerate form.
struct FlowFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace flatform::detail
