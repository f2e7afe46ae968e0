#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "flatform/config.hpp"
#include "flatform/connection.hpp"
#include "flatform/kernel.hpp"

namespace flatform {

struct Riemann {
    int n = 0;
    std::vector<double> v;
    Riemann() = default;
    explicit Riemann(int dim) : n(dim), v(static_cast<std::size_t>(dim * dim * dim * dim), 0.0) {}
    double& operator()(int i, int j, int k, int l) { return v[static_cast<std::size_t>(((i * n + j) * n + k) * n + l)]; }
    double operator()(int i, int j, int k, int l) const { return v[static_cast<std::size_t>(((i * n + j) * n + k) * n + l)]; }
    double max_abs() const;
};

// R_ijkl = Σ_s g_is(∂_kΓ^s_jl − ∂_lΓ^s_jk + Σ_a(Γ^s_ka Γ^a_lj − Γ^s_la Γ^a_jk)).
// ∂Γ by central differences with `richardson` extrapolation steps. Only k<l
// is computed; R_ijlk = −R_ijkl is set exactly.
Riemann lowered_curvature(const MatrixFn& g, const GammaFn& gamma, const Eigen::VectorXd& x, double h,
                          int richardson = 1);

enum class Outcome { Pass, Fail, Margin, Skipped };
enum class Verdict { Flat, NotFlat, Inconclusive };
enum class Reason { None, NonConstantRank, ToleranceMargin };

const char* to_string(Outcome o);
const char* to_string(Verdict v);
const char* to_string(Reason r);

// Pass if value ≤ tol, Fail if value ≥ margin·tol, Margin otherwise.
Outcome classify(double value, double tol, double margin);

struct Condition {
    std::string name;
    double value = 0.0;
    double tol = 0.0;
    Outcome outcome = Outcome::Skipped;
    bool decisive = true;
    std::string note;
};

struct FlatnessReport {
    Verdict verdict = Verdict::Inconclusive;
    Reason reason = Reason::None;
    std::string checks;  // which family of conditions was applied
    double scale = 1.0;
    int grid_per_axis = 0;
    RankProfile ranks;
    std::vector<Condition> conditions;
    double max_curvature = 0.0;

    const Condition* find(const std::string& name) const;
    // Derives verdict/reason from the decisive rows (rank rows first).
    void decide();
};

// Grid max |B_ij| clamped below by 1.
double form_scale(const MatrixFn& b, const Grid& grid);

// Flatness decision for g alone, ω alone (Darboux), or the pair, on
// the grid. Either jet may be null or numerically zero.
FlatnessReport flatness_verdict(const MatrixJet* g, const MatrixJet* w, const Grid& grid, const Tolerances& tol);

// Grid max of |R(g,Γ)| with the given Γ.
double curvature_sweep(const MatrixFn& g, const GammaFn& gamma, const Grid& grid, double h, int richardson);

double constant_curvature_residual(const MatrixFn& g, const GammaFn& gamma, double kappa, const Grid& grid, double h);
// max |∇_m R_ijkl|; R evaluated with inner step h, outer derivative step h_outer.
double symmetric_space_residual(const MatrixFn& g, const GammaFn& gamma, const Grid& grid, double h, double h_outer);

}  // namespace flatform
