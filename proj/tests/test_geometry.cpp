#include <gtest/gtest.h>

#include "steklov/fields.hpp"
#include "steklov/forms.hpp"
#include "steklov/geometry.hpp"
#include "steklov/spectrum.hpp"

#include <cmath>
#include <random>

using namespace steklov;

TEST(Annulus, Counting) {
    const Mesh mesh = build_annulus(0.5, 1.0, 2, 8);
    EXPECT_EQ(mesh.vertex_count(), 24);
    EXPECT_EQ(mesh.triangle_count(), 32);
    EXPECT_EQ(mesh.boundary_count(), 16);
}

TEST(Annulus, AreaMatchesExact) {
    const Mesh mesh = build_annulus(0.5, 1.0, 8, 64);
    const double exact = M_PI * (1.0 - 0.25);
    EXPECT_NEAR(total_area(mesh), exact, 0.005 * exact);
}

TEST(Annulus, DegenerateRadiiRejected) {
    EXPECT_THROW(build_annulus(1.0, 1.0, 2, 8), ArgumentError);
}

TEST(SolveEigen, IdentityPencilSmoke) {
    const Mesh mesh = build_annulus(0.5, 1.0, 4, 16);
    const auto pair = assemble_problem(mesh, ProblemSpec::p1());
    const auto sol = solve_eigen(pair, 6);
    ASSERT_EQ(sol.count(), 6);
    // a-orthonormality
    const Eigen::MatrixXd gram = sol.X.transpose() * (pair.A * sol.X);
    EXPECT_LT((gram - Eigen::MatrixXd::Identity(6, 6)).cwiseAbs().maxCoeff(), 1e-8);
    const Eigen::MatrixXd bgram = sol.X.transpose() * (pair.B * sol.X);
    Eigen::MatrixXd expect = sol.mu.asDiagonal();
    EXPECT_LT((bgram - expect).cwiseAbs().maxCoeff(), 1e-8);
    for (int i = 1; i < 6; ++i) EXPECT_GE(sol.lambda(i), sol.lambda(i - 1));
    EXPECT_GT(sol.lambda(0), 0.0);
}
