#pragma once

#include <Eigen/Dense>
#include <stdexcept>

#include "flatform/connection.hpp"
#include "flatform/forms.hpp"
#include "flatform/kernel.hpp"

namespace flatform {

class SingularOmega : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// P = ω^{-1}, skew-symmetrized; throws SingularOmega if cond(ω) > cond_max.
Eigen::MatrixXd invert_omega(const Eigen::MatrixXd& w, double cond_max = 1e8);

// Cyclic sum Σ_s P^sk ∂_s P^ij + P^si ∂_s P^jk + P^sj ∂_s P^ki, max over
// (i,j,k) at one point, given P and dP[s] = ∂_s P.
double jacobi_at(const Eigen::MatrixXd& P, const std::vector<Eigen::MatrixXd>& dP);
// Symbolic P.
double jacobi_residual(const ExprMatrix& P, const Grid& grid);
// P dual to ω, using ∂P = −P ∂ω P.
double jacobi_residual_dual(const MatrixJet& w, const Grid& grid, double cond_max = 1e8);
// P as a black box, ∂P by central differences with step h.
double jacobi_residual_fd(const MatrixFn& P, const Grid& grid, double h);

// {f,h} = Σ ∂_i f ∂_j h P^ij.
double poisson_bracket(const Eigen::VectorXd& df, const Eigen::VectorXd& dh, const Eigen::MatrixXd& P);
// X_f^i = Σ_s P^si ∂_s f  (= −P df for skew P).
Eigen::VectorXd hamiltonian_field(const Eigen::MatrixXd& P, const Eigen::VectorXd& df);
VectorField hamiltonian_field(const ExprMatrix& P, const Expr& f);

// max |Σ g_ia P^ab P^cd g_dj ∇_k ω_bc| over grid; Γ should solve the g-system.
double parallel1_residual(const MatrixJet& g, const MatrixJet& w, const GammaFn& gamma, const Grid& grid,
                          double cond_max = 1e8);
// max |Σ g_ai g_bj ∂_k P^ab + Σ_s (P_i^s Γ_ks,j + P^s_j Γ_ks,i)| over grid, P = ω^{-1}.
double parallelPg_residual(const MatrixJet& g, const MatrixJet& w, const Grid& grid, double cond_max = 1e8);

}  // namespace flatform
