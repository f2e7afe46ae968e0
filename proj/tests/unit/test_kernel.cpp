#include <doctest.h>

#include "flatform/kernel.hpp"
#include "helpers.hpp"

using namespace flatform;
using testing::vec;

TEST_SUITE("kernel") {
    TEST_CASE("numeric rank uses a relative cutoff") {
        CHECK(numeric_rank(Eigen::Vector3d(1, 1e-12, 0).asDiagonal().toDenseMatrix(), 1e-8) == 1);
        CHECK(numeric_rank(Eigen::Vector3d(1e6, 1, 0).asDiagonal().toDenseMatrix(), 1e-8) == 2);
        CHECK(numeric_rank(Eigen::MatrixXd::Zero(3, 3), 1e-8) == 0);
    }

    TEST_CASE("kernel basis and covector completion annihilate the kernel") {
        Eigen::MatrixXd g(3, 3);
        g << 2, 1, 1, 1, 1, 0, 1, 0, 1;  // rank 2, kernel ∝ (1, −1, −1)
        const KernelData k = kernel_basis(g, 1e-8);
        CHECK(k.m == 2);
        REQUIRE(k.B.cols() == 1);
        CHECK((g * k.B).norm() < 1e-12);
        CHECK(k.nonpivot.size() == 2);
        for (const Eigen::VectorXd& u : {vec({1, 0}), vec({0.3, -2})}) {
            const Eigen::VectorXd full = k.complete(u);
            CHECK(std::abs(full.dot(k.B.col(0))) < 1e-12);
            for (std::size_t i = 0; i < k.nonpivot.size(); ++i) CHECK(full[k.nonpivot[i]] == u[static_cast<Eigen::Index>(i)]);
        }
    }

    TEST_CASE("fixed pivots reproduce the free choice") {
        Eigen::MatrixXd g = Eigen::Vector3d(1, 0, 4).asDiagonal();
        const KernelData a = kernel_basis(g, 1e-8);
        const KernelData b = kernel_basis_fixed(g, 1e-8, a.pivot);
        CHECK(a.pivot == b.pivot);
        CHECK((a.F - b.F).norm() < 1e-12);
        CHECK(a.pivot == std::vector<int>{1});
    }

    TEST_CASE("ill-conditioned pivot block is refused") {
        Eigen::MatrixXd g(2, 2);
        g << 1, 0, 0, 0;
        CHECK_THROWS_AS(kernel_basis_fixed(g, 1e-8, {0}), KernelPivotError);
    }

    TEST_CASE("null space and intersection kernel") {
        Eigen::MatrixXd g = Eigen::Vector3d(1, 0, 0).asDiagonal();
        Eigen::MatrixXd w = Eigen::MatrixXd::Zero(3, 3);
        CHECK(null_space(g, 1e-8).cols() == 2);
        CHECK(intersection_kernel(g, w, 1e-8).cols() == 2);
        w(1, 2) = 1;
        w(2, 1) = -1;
        CHECK(intersection_kernel(g, w, 1e-8).cols() == 0);
    }

    TEST_CASE("rank profile detects rank drops") {
        auto g = [](const Eigen::VectorXd& x) {
            Eigen::MatrixXd m(2, 2);
            m << 4 * x[0] * x[0], 4 * x[0] * x[1], 4 * x[0] * x[1], 4 * x[1] * x[1];
            return m;
        };
        auto zero = [](const Eigen::VectorXd&) { return Eigen::MatrixXd(Eigen::MatrixXd::Zero(2, 2)); };
        const RankProfile away = rank_profile(g, zero, Grid({{1, 2}, {1, 2}}, 5), 1e-8);
        CHECK(away.constant_g);
        CHECK(away.rank_g.front() == 1);
        const RankProfile origin = rank_profile(g, zero, Grid({{-1, 1}, {-1, 1}}, 5), 1e-8);
        CHECK_FALSE(origin.constant_g);
    }

    TEST_CASE("basis alignment fixes order and sign") {
        Eigen::MatrixXd ref = Eigen::MatrixXd::Identity(3, 2);
        Eigen::MatrixXd b(3, 2);
        b << 0, -1, 1, 0, 0, 0;
        const Eigen::MatrixXd a = align_basis(b, ref);
        CHECK((a - ref).norm() < 1e-15);
    }
}
