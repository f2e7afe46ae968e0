#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "flatform/chart.hpp"

namespace flatform {

int numeric_rank(const Eigen::MatrixXd& m, double sigma_tol);

struct RankProfile {
    std::vector<int> rank_g, rank_w, rank_intersection;  // per grid point
    bool constant_g = true, constant_w = true, constant_intersection = true;
    double sigma_tol = 1e-8;
    int grid_per_axis = 0;
    int rank_g_at(std::size_t i) const { return rank_g[i]; }
};

using MatrixFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;

// Ranks of g, ω and dim of R_g ∩ R_ω reported as n − rank[g; ω].
RankProfile rank_profile(const MatrixFn& g, const MatrixFn& w, const Grid& grid, double sigma_tol);

class KernelPivotError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct KernelData {
    int n = 0;
    int m = 0;                    // rank
    Eigen::MatrixXd B;            // n×(n−m), orthonormal columns
    std::vector<int> nonpivot;    // m row indices (the free u components)
    std::vector<int> pivot;       // n−m row indices forming B″
    Eigen::MatrixXd F;            // m×(n−m): u_pivot = u_nonpivot · F
    double pivot_condition = 1.0; // cond(B″)

    // Full covector from its free components.
    Eigen::VectorXd complete(const Eigen::VectorXd& u_free) const;
};

// Kernel, pivot choice (column-pivoted QR of Bᵀ) and F = −B′(B″)^{-1}.
// Throws KernelPivotError if cond(B″) > cond_max.
KernelData kernel_basis(const Eigen::MatrixXd& m, double sigma_tol, double cond_max = 1e6);
// Same with the pivot rows fixed in advance (used along integration paths).
KernelData kernel_basis_fixed(const Eigen::MatrixXd& m, double sigma_tol, const std::vector<int>& pivot,
                              double cond_max = 1e6);

// Orthonormal basis of the null space of m (columns).
Eigen::MatrixXd null_space(const Eigen::MatrixXd& m, double sigma_tol);
Eigen::MatrixXd intersection_kernel(const Eigen::MatrixXd& g, const Eigen::MatrixXd& w, double sigma_tol);

// Reorders and flips columns of b to best match ref (greedy |⟨b_i, ref_j⟩|).
Eigen::MatrixXd align_basis(const Eigen::MatrixXd& b, const Eigen::MatrixXd& ref);

}  // namespace flatform
