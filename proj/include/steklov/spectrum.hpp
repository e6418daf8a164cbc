#pragma once

#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "steklov/errors.hpp"
#include "steklov/forms.hpp"

namespace steklov {

/// Eigenpairs of A_h x = lambda B_h x with A_h SPD and B_h PSD, equivalently
/// of the compact operator E = A_h^{-1} B_h with eigenvalues mu = 1/lambda.
/// Columns of X are a-orthonormal: X^T A_h X = I and X^T B_h X = diag(mu).
struct EigenSolution {
    Eigen::VectorXd lambda;   // ascending, finite eigenvalues only
    Eigen::VectorXd mu;       // reciprocals, aligned with lambda
    Eigen::MatrixXd X;        // eigenvectors, one column per eigenvalue
    int discarded = 0;        // modes classified as lambda = infinity (mu below cutoff)
    SpMat A;                  // the pencil the solution was computed from
    SpMat B;

    int count() const { return static_cast<int>(lambda.size()); }
};

/// Relative mu cutoff classifying numerically-infinite eigenvalues.
inline constexpr double kMuCutoff = 1e-12;

/// Solve the pencil by Cholesky reduction restricted to the range of B_h:
/// with P A P^T = L L^T and R the rows of B carrying nonzero entries, the
/// nonzero spectrum of C = L^{-1} P B P^T L^{-T} equals that of the small
/// matrix W^T (Z^T Z) W, where B_RR = U D U^T, W = U sqrt(D) and
/// Z = L^{-1} P E_R W. Cost O(n |R|) + O(|R|^3) instead of O(n^3).
inline EigenSolution solve_eigen(const AssembledPair& pair, int k) {
    const int n = static_cast<int>(pair.A.rows());
    if (k < 0) throw ArgumentError("solve_eigen: k must be nonnegative");

    Eigen::SimplicialLLT<SpMat> llt(pair.A);
    if (llt.info() != Eigen::Success) throw CoercivityError("solve_eigen: Cholesky of A_h failed");

    // rows of B with structural nonzeros
    std::vector<int> support;
    {
        std::vector<bool> seen(n, false);
        for (int c = 0; c < pair.B.outerSize(); ++c)
            for (SpMat::InnerIterator it(pair.B, c); it; ++it)
                if (it.value() != 0.0) seen[it.row()] = true;
        for (int i = 0; i < n; ++i)
            if (seen[i]) support.push_back(i);
    }
    const int s = static_cast<int>(support.size());

    EigenSolution sol;
    sol.A = pair.A;
    sol.B = pair.B;
    if (s == 0) {
        if (k > 0) throw RankError("solve_eigen: B_h is zero (rank 0), cannot return " + std::to_string(k));
        sol.discarded = n;
        sol.lambda.resize(0);
        sol.mu.resize(0);
        sol.X.resize(n, 0);
        return sol;
    }

    Eigen::MatrixXd Bss(s, s);
    for (int i = 0; i < s; ++i)
        for (int j = 0; j < s; ++j) Bss(i, j) = pair.B.coeff(support[i], support[j]);
    Bss = 0.5 * (Bss + Bss.transpose().eval());

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> bss_eig(Bss);
    const Eigen::VectorXd d = bss_eig.eigenvalues();
    const double dmax = d.cwiseMax(0.0).maxCoeff();
    std::vector<int> keep;
    for (int i = 0; i < s; ++i)
        if (d(i) > 1e-14 * dmax) keep.push_back(i);
    const int r = static_cast<int>(keep.size());
    Eigen::MatrixXd W(s, r);
    for (int j = 0; j < r; ++j) W.col(j) = bss_eig.eigenvectors().col(keep[j]) * std::sqrt(d(keep[j]));

    // scatter W into full rows, permute, and back-substitute through L
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n, r);
    for (int i = 0; i < s; ++i) rhs.row(support[i]) = W.row(i);
    rhs = llt.permutationP() * rhs;
    const SpMat L = llt.matrixL();
    Eigen::MatrixXd ZW = L.triangularView<Eigen::Lower>().solve(rhs);

    Eigen::MatrixXd small = ZW.transpose() * ZW;
    small = 0.5 * (small + small.transpose().eval());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> small_eig(small);

    // eigenvalues ascend; walk from the top (largest mu = smallest lambda)
    const Eigen::VectorXd mu_all = small_eig.eigenvalues();
    const double mu_max = mu_all.cwiseMax(0.0).maxCoeff();
    std::vector<int> retained;
    for (int i = r - 1; i >= 0; --i)
        if (mu_all(i) > kMuCutoff * mu_max) retained.push_back(i);
    const int finite = static_cast<int>(retained.size());
    if (k > finite)
        throw RankError("solve_eigen: requested " + std::to_string(k) + " eigenpairs but rank(B_h) = " +
                        std::to_string(finite));

    const int m = k;
    sol.discarded = n - finite;
    sol.lambda.resize(m);
    sol.mu.resize(m);
    sol.X.resize(n, m);
    const SpMat Lt = L.transpose();
    for (int j = 0; j < m; ++j) {
        const int idx = retained[j];
        const double mu = mu_all(idx);
        sol.mu(j) = mu;
        sol.lambda(j) = 1.0 / mu;
        const Eigen::VectorXd v = ZW * small_eig.eigenvectors().col(idx) / std::sqrt(mu);
        const Eigen::VectorXd w = Lt.triangularView<Eigen::Upper>().solve(v);
        sol.X.col(j) = llt.permutationP().transpose() * w;
    }
    return sol;
}

/// A cluster of computed eigenvalues treated as one multiplicity group.
struct EigenGroup {
    std::vector<int> members;   // ascending indices into the solution
    double lambda_bar = 0.0;    // mean of the members
    double mu_bar = 0.0;
    int multiplicity = 0;
    double tol_used = 0.0;
};

/// Single-linkage clustering on relative gaps between consecutive eigenvalues.
inline std::vector<EigenGroup> cluster_eigen(const EigenSolution& sol, double rel_tol) {
    if (!(rel_tol > 0.0)) throw ArgumentError("cluster_eigen: rel_tol must be positive");
    std::vector<EigenGroup> groups;
    const int n = sol.count();
    int start = 0;
    auto flush = [&](int begin, int end) {
        EigenGroup g;
        g.tol_used = rel_tol;
        for (int i = begin; i < end; ++i) g.members.push_back(i);
        g.multiplicity = end - begin;
        double lam = 0.0, mu = 0.0;
        for (int i = begin; i < end; ++i) {
            lam += sol.lambda(i);
            mu += sol.mu(i);
        }
        g.lambda_bar = lam / g.multiplicity;
        g.mu_bar = mu / g.multiplicity;
        groups.push_back(std::move(g));
    };
    for (int i = 1; i < n; ++i) {
        const double gap = sol.lambda(i) - sol.lambda(i - 1);
        const double scale = std::max(std::abs(sol.lambda(i)), std::abs(sol.lambda(i - 1)));
        if (gap > rel_tol * std::max(scale, 1e-300)) {
            flush(start, i);
            start = i;
        }
    }
    if (n > 0) flush(start, n);
    return groups;
}

/// Result of the random min-max verification.
struct MinMaxReport {
    struct Level {
        int index = 0;              // deflation level t (1-based)
        double mu = 0.0;            // mu_t
        double max_rayleigh = 0.0;  // max observed phi^T B phi over the trials
        int violations = 0;
    };
    std::vector<Level> levels;
    int trials = 0;
    std::uint64_t seed = 0;
    bool passed = true;
};

/// Check the min-max characterization: for random a-normalized trial vectors
/// orthogonalized against the first t-1 eigenvectors, the Rayleigh quotient
/// phi^T B phi never exceeds mu_t (up to 1e-10).
inline MinMaxReport minmax_check(const AssembledPair& pair, const EigenSolution& sol, int trials,
                                 std::uint64_t seed, int max_levels = 3) {
    if (trials < 1) throw ArgumentError("minmax_check: need at least one trial");
    MinMaxReport report;
    report.trials = trials;
    report.seed = seed;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;
    const int n = static_cast<int>(pair.A.rows());
    const int levels = std::min(max_levels, sol.count());
    for (int t = 0; t < levels; ++t) {
        MinMaxReport::Level level;
        level.index = t + 1;
        level.mu = sol.mu(t);
        for (int trial = 0; trial < trials; ++trial) {
            Eigen::VectorXd phi(n);
            for (int i = 0; i < n; ++i) phi(i) = gauss(rng);
            for (int j = 0; j < t; ++j) {
                const double proj = sol.X.col(j).dot(pair.A * phi);
                phi -= proj * sol.X.col(j);
            }
            const double a_norm = std::sqrt(phi.dot(pair.A * phi));
            if (!(a_norm > 0.0)) continue;
            phi /= a_norm;
            const double rayleigh = phi.dot(pair.B * phi);
            level.max_rayleigh = std::max(level.max_rayleigh, rayleigh);
            if (rayleigh > level.mu + 1e-10) {
                level.violations++;
                report.passed = false;
            }
        }
        report.levels.push_back(level);
    }
    return report;
}

} // namespace steklov
