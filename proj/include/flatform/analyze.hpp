#pragma once

#include <stdexcept>
#include <string>

#include "flatform/construct.hpp"
#include "flatform/curvature.hpp"
#include "flatform/problem.hpp"

namespace flatform {

class UnsupportedCase : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Which decision rule / constructor applies.
enum class Case { Trivial, Symmetric, Skew, SymmetricPlusSymplectic, General };
const char* to_string(Case c);

struct Analysis {
    Case which = Case::Trivial;
    FlatnessReport report;
};

// Classifies by the numeric rank profile on the analysis grid.
Case classify_case(const Problem& p);

Analysis analyze(const Problem& p);

// Builds a flat chart for the supported cases; throws UnsupportedCase
// otherwise and ConstructionError when a constructor fails.
FlatChartResult construct(const Problem& p);
int default_certify_grid(const Problem& p, Case c);

struct VerifyOutcome {
    VerifyResult result;
    double tol = 0.0;  // tol_construct × scale
    double jacobian_min = 0.0;
    bool invertible = true;
    bool pass = false;
    std::string message;
};
VerifyOutcome verify(const Problem& p, const ChartFile& chart);

}  // namespace flatform
