#pragma once

namespace flatform {

// Every numeric threshold in one record. Values marked "× scale" are
// multiplied by max(1, grid-max |B_ij|) before use.
struct Tolerances {
    double sigma_tol = 1e-8;        // relative singular-value cutoff for ranks
    double tol_lin = 1e-7;          // linear solvability: residual ≤ tol_lin·(1+‖rhs‖)
    double tol_stat = 1e-7;         // stationarity (× scale)
    double tol_closed = 1e-8;       // |dω| (× scale)
    double tol_flat = 1e-5;         // curvature (× scale)
    double tol_parallel = 1e-7;     // parallel1 / parallelPg (× scale)
    double tol_jacobi = 1e-6;       // Jacobi identity of P
    double tol_construct = 1e-5;    // pullback certification
    double tol_loop = 1e-6;         // Pfaffian loop / reorder defects
    double tol_bracket_var = 1e-8;  // variance of Poisson brackets
    double tol_commute = 1e-6;      // kernel-frame commutators
    double margin = 10.0;           // NOT_FLAT needs ≥ margin·tol
    double kernel_cond_max = 1e6;
    double omega_cond_max = 1e8;
    double jac_min = 1e-8;
    double h_jac = 1e-5;   // × box diameter
    double h_curv = 1e-3;  // × box diameter
    int richardson = 1;    // extrapolation steps for ∂Γ
    double ode_atol = 1e-10;
    double ode_rtol = 1e-8;
    int max_box_shrink = 5;
};

}  // namespace flatform
