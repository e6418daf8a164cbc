#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "steklov/errors.hpp"
#include "steklov/fields.hpp"
#include "steklov/forms.hpp"
#include "steklov/spectrum.hpp"

namespace steklov {

// ---------------------------------------------------------------------------
// Derivatives of the assembled forms with respect to the deformation field,
// taken at psi = 0, together with the pullback assemblies whose exact
// t-derivatives they are. Every derivative below uses only first derivatives
// of the trial functions, which is what P1 elements provide.
// ---------------------------------------------------------------------------

/// Derivative of the (coefficient-weighted) grad-grad form:
/// entry (p,q) = sum over elements of
///   int div(psi) grad(phi_p) . C grad(phi_q)
///       - grad(phi_p)^T (J C + C J^T) grad(phi_q) dx,   J = grad(psi).
inline SpMat d_stiffness(const Mesh& mesh, const DisplacementField& psi,
                         const MatrixField& coeff, int quad_degree = 2) {
    const int n = mesh.vertex_count();
    const auto& rule = triangle_rule(quad_degree);
    std::vector<Triplet> trip;
    trip.reserve(mesh.triangles.size() * rule.size() * 9);
    for (int t = 0; t < mesh.triangle_count(); ++t) {
        const auto& tri = mesh.triangles[t];
        const double area = triangle_area(mesh, t);
        const auto g = hat_gradients(mesh, t);
        for (const auto& node : rule) {
            const Vec2 x = node.bary[0] * mesh.vertices[tri[0]] + node.bary[1] * mesh.vertices[tri[1]] +
                           node.bary[2] * mesh.vertices[tri[2]];
            const Mat2 jac = psi.jacobian(x);
            Mat2 c = coeff(x);
            c = 0.5 * (c + c.transpose().eval());
            const Mat2 kernel = jac.trace() * c - (jac * c + c * jac.transpose());
            const double w = node.weight * area;
            for (int p = 0; p < 3; ++p)
                for (int q = 0; q < 3; ++q)
                    trip.emplace_back(tri[p], tri[q],
                                      w * g.row(p).dot((kernel * g.row(q).transpose()).eval()));
        }
    }
    SpMat out(n, n);
    out.setFromTriplets(trip.begin(), trip.end());
    return out;
}

inline SpMat d_stiffness(const Mesh& mesh, const DisplacementField& psi, int quad_degree = 2) {
    return d_stiffness(mesh, psi, identity_coefficient(), quad_degree);
}

/// Pullback of the grad-grad form through x -> x + t psi(x):
/// entry-wise int grad(phi_p)^T F^-1 C F^-T grad(phi_q) |det F| dx with
/// F = I + t grad(psi) at the quadrature point.
inline SpMat pullback_stiffness(const Mesh& mesh, const DisplacementField& psi, double t,
                                const MatrixField& coeff, int quad_degree = 2) {
    const int n = mesh.vertex_count();
    const auto& rule = triangle_rule(quad_degree);
    std::vector<Triplet> trip;
    trip.reserve(mesh.triangles.size() * rule.size() * 9);
    for (int tr = 0; tr < mesh.triangle_count(); ++tr) {
        const auto& tri = mesh.triangles[tr];
        const double area = triangle_area(mesh, tr);
        const auto g = hat_gradients(mesh, tr);
        for (const auto& node : rule) {
            const Vec2 x = node.bary[0] * mesh.vertices[tri[0]] + node.bary[1] * mesh.vertices[tri[1]] +
                           node.bary[2] * mesh.vertices[tri[2]];
            const Mat2 F = Mat2::Identity() + t * psi.jacobian(x);
            const double det = F.determinant();
            if (!(det > 0.0))
                throw DeformationError("pullback_stiffness: det(I + t grad psi) <= 0 at (" +
                                       std::to_string(x.x()) + "," + std::to_string(x.y()) + ")");
            const Mat2 Finv = F.inverse();
            Mat2 c = coeff(x);
            c = 0.5 * (c + c.transpose().eval());
            const Mat2 kernel = det * (Finv * c * Finv.transpose());
            const double w = node.weight * area;
            for (int p = 0; p < 3; ++p)
                for (int q = 0; q < 3; ++q)
                    trip.emplace_back(tri[p], tri[q],
                                      w * g.row(p).dot((kernel * g.row(q).transpose()).eval()));
        }
    }
    SpMat out(n, n);
    out.setFromTriplets(trip.begin(), trip.end());
    return out;
}

inline SpMat pullback_stiffness(const Mesh& mesh, const DisplacementField& psi, double t,
                                int quad_degree = 2) {
    return pullback_stiffness(mesh, psi, t, identity_coefficient(), quad_degree);
}

/// Derivative of the weighted boundary mass: per-edge quadrature of
/// w(x) phi_p phi_q (div psi - nu^T grad(psi) nu).
inline SpMat d_boundary_mass(const Mesh& mesh, BoundaryRegion region, const DisplacementField& psi,
                             const ScalarField& weight, int edge_points = 2) {
    const int n = mesh.vertex_count();
    const auto& rule = edge_rule(edge_points);
    std::vector<Triplet> trip;
    for (int e = 0; e < mesh.boundary_count(); ++e) {
        const auto& be = mesh.boundary[e];
        if (!edge_in_region(be, region)) continue;
        const Vec2& pa = mesh.vertices[be.a];
        const Vec2& pb = mesh.vertices[be.b];
        const double len = (pb - pa).norm();
        const Vec2 nu = boundary_normal(mesh, e);
        const int idx[2] = {be.a, be.b};
        for (const auto& node : rule) {
            const Vec2 x = pa + node.s * (pb - pa);
            const Mat2 jac = psi.jacobian(x);
            const double shape_weight = jac.trace() - nu.dot(jac * nu);
            const double w = node.weight * len * weight(x) * shape_weight;
            const double hat[2] = {1.0 - node.s, node.s};
            for (int p = 0; p < 2; ++p)
                for (int q = 0; q < 2; ++q) trip.emplace_back(idx[p], idx[q], w * hat[p] * hat[q]);
        }
    }
    SpMat out(n, n);
    out.setFromTriplets(trip.begin(), trip.end());
    return out;
}

inline SpMat d_boundary_mass(const Mesh& mesh, BoundaryRegion region, const DisplacementField& psi,
                             int edge_points = 2) {
    return d_boundary_mass(mesh, region, psi, unit_weight(), edge_points);
}

/// Pullback of the weighted boundary mass: the edge measure is stretched by
/// the pointwise tangential factor |(I + t grad psi) tau|, whose t-derivative
/// at 0 is exactly div psi - nu^T grad(psi) nu on the straight edge.
inline SpMat pullback_boundary_mass(const Mesh& mesh, BoundaryRegion region,
                                    const DisplacementField& psi, double t,
                                    const ScalarField& weight, int edge_points = 2) {
    const int n = mesh.vertex_count();
    const auto& rule = edge_rule(edge_points);
    std::vector<Triplet> trip;
    for (int e = 0; e < mesh.boundary_count(); ++e) {
        const auto& be = mesh.boundary[e];
        if (!edge_in_region(be, region)) continue;
        const Vec2& pa = mesh.vertices[be.a];
        const Vec2& pb = mesh.vertices[be.b];
        const double len = (pb - pa).norm();
        const Vec2 tau = (pb - pa) / len;
        const int idx[2] = {be.a, be.b};
        for (const auto& node : rule) {
            const Vec2 x = pa + node.s * (pb - pa);
            const Mat2 F = Mat2::Identity() + t * psi.jacobian(x);
            const double stretch = (F * tau).norm();
            if (!(stretch > 0.0))
                throw DeformationError("pullback_boundary_mass: edge " + std::to_string(e) +
                                       " degenerates at t = " + std::to_string(t));
            const double w = node.weight * len * weight(x) * stretch;
            const double hat[2] = {1.0 - node.s, node.s};
            for (int p = 0; p < 2; ++p)
                for (int q = 0; q < 2; ++q) trip.emplace_back(idx[p], idx[q], w * hat[p] * hat[q]);
        }
    }
    SpMat out(n, n);
    out.setFromTriplets(trip.begin(), trip.end());
    return out;
}

inline SpMat pullback_boundary_mass(const Mesh& mesh, BoundaryRegion region,
                                    const DisplacementField& psi, double t, int edge_points = 2) {
    return pullback_boundary_mass(mesh, region, psi, t, unit_weight(), edge_points);
}

/// Derivative of the weighted volume mass: per-triangle quadrature of
/// w(x) phi_p phi_q div psi.
inline SpMat d_volume_mass(const Mesh& mesh, const DisplacementField& psi, const ScalarField& weight,
                           int quad_degree = 2) {
    return assemble_volume_mass(
        mesh, [&](const Vec2& x) { return weight(x) * psi.divergence(x); }, quad_degree);
}

inline SpMat d_volume_mass(const Mesh& mesh, const DisplacementField& psi, int quad_degree = 2) {
    return d_volume_mass(mesh, psi, unit_weight(), quad_degree);
}

/// Pullback of the weighted volume mass: weight scaled by |det(I + t grad psi)|.
inline SpMat pullback_volume_mass(const Mesh& mesh, const DisplacementField& psi, double t,
                                  const ScalarField& weight, int quad_degree = 2) {
    return assemble_volume_mass(
        mesh,
        [&](const Vec2& x) {
            const Mat2 F = Mat2::Identity() + t * psi.jacobian(x);
            const double det = F.determinant();
            if (!(det > 0.0))
                throw DeformationError("pullback_volume_mass: det(I + t grad psi) <= 0");
            return weight(x) * det;
        },
        quad_degree);
}

inline SpMat pullback_volume_mass(const Mesh& mesh, const DisplacementField& psi, double t,
                                  int quad_degree = 2) {
    return pullback_volume_mass(mesh, psi, t, unit_weight(), quad_degree);
}

/// All form derivatives for one field, with the weights of a problem variant.
struct DerivativeForms {
    SpMat dStiff;
    SpMat dBMassAll;
    SpMat dBMassS;
    SpMat dVMass;
    json psi_spec;
};

inline DerivativeForms assemble_derivative_forms(const Mesh& mesh, const DisplacementField& psi,
                                                 const ProblemSpec& spec = ProblemSpec::p1()) {
    DerivativeForms forms;
    forms.psi_spec = psi.spec;
    forms.dStiff = d_stiffness(mesh, psi, spec.stiffness_coefficient(), spec.volume_quad_degree);
    forms.dBMassAll =
        d_boundary_mass(mesh, BoundaryRegion::All, psi, spec.mass_weight(), spec.edge_quad_points);
    forms.dBMassS = d_boundary_mass(mesh, BoundaryRegion::S, psi, spec.edge_quad_points);
    forms.dVMass = d_volume_mass(mesh, psi, spec.mass_weight(), spec.volume_quad_degree);
    return forms;
}

// ---------------------------------------------------------------------------
// Degenerate-group perturbation matrix and first-order splitting prediction.
// ---------------------------------------------------------------------------

/// Projection of the pencil derivative onto a degenerate group:
/// M = X_g^T (dB - mu_bar dA) X_g, symmetric by construction.
struct PerturbationMatrix {
    Eigen::MatrixXd M;
    double deviation = 0.0;      // || M - (tr M / m) I ||_F
    double lambda_bar = 0.0;
    double mu_bar = 0.0;
    std::vector<int> members;
    json perturbation;           // field or coefficient spec it corresponds to
};

/// Frobenius distance of M from the nearest scalar multiple of the identity.
/// Zero is exactly the no-splitting alternative.
inline double nosplit_deviation(const Eigen::MatrixXd& M) {
    const int m = static_cast<int>(M.rows());
    if (m == 0 || M.cols() != m) throw ArgumentError("nosplit_deviation: matrix must be square");
    const double rho = M.trace() / m;
    return (M - rho * Eigen::MatrixXd::Identity(m, m)).norm();
}

inline double nosplit_deviation(const PerturbationMatrix& pm) { return nosplit_deviation(pm.M); }

/// dA and dB of the pencil for a variant: dA is the derivative of the left
/// form (stiffness plus the variant's mass term), dB the derivative of the
/// right form (unit boundary mass on S).
inline std::pair<SpMat, SpMat> pencil_derivative(const Mesh& mesh, const ProblemSpec& spec,
                                                 const DisplacementField& psi) {
    const SpMat dK = d_stiffness(mesh, psi, spec.stiffness_coefficient(), spec.volume_quad_degree);
    const SpMat dMass =
        spec.boundary_mass_type()
            ? d_boundary_mass(mesh, BoundaryRegion::All, psi, spec.mass_weight(), spec.edge_quad_points)
            : d_volume_mass(mesh, psi, spec.mass_weight(), spec.volume_quad_degree);
    const SpMat dB = d_boundary_mass(mesh, BoundaryRegion::S, psi, spec.edge_quad_points);
    return {SpMat(dK + dMass), dB};
}

inline PerturbationMatrix perturbation_matrix(const ProblemSpec& spec, const Mesh& mesh,
                                              const EigenSolution& sol, const EigenGroup& group,
                                              const DisplacementField& psi) {
    if (group.members.empty()) throw ArgumentError("perturbation_matrix: empty group");
    for (int idx : group.members)
        if (idx < 0 || idx >= sol.count())
            throw ArgumentError("perturbation_matrix: group member " + std::to_string(idx) +
                                " not in solution of size " + std::to_string(sol.count()));
    if (sol.A.rows() != mesh.vertex_count())
        throw ArgumentError("perturbation_matrix: solution does not match the mesh");

    const auto [dA, dB] = pencil_derivative(mesh, spec, psi);
    const int m = static_cast<int>(group.members.size());
    Eigen::MatrixXd Xg(sol.X.rows(), m);
    for (int j = 0; j < m; ++j) Xg.col(j) = sol.X.col(group.members[j]);

    PerturbationMatrix out;
    out.lambda_bar = group.lambda_bar;
    out.mu_bar = group.mu_bar;
    out.members = group.members;
    out.perturbation = psi.spec;
    const SpMat combo = dB - group.mu_bar * dA;
    out.M = Xg.transpose() * (combo * Xg);
    out.M = 0.5 * (out.M + out.M.transpose().eval());
    out.deviation = nosplit_deviation(out.M);
    return out;
}

/// First-order eigenvalue slopes of the group: d(mu) are the eigenvalues of M
/// under the a-orthonormal gauge, and d(lambda) = -lambda_bar^2 d(mu).
/// Returned ascending; invariant under rotation of the group basis.
inline std::vector<double> predict_splitting(const PerturbationMatrix& pm) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(pm.M);
    std::vector<double> slopes;
    for (int i = 0; i < pm.M.rows(); ++i)
        slopes.push_back(-pm.lambda_bar * pm.lambda_bar * eig.eigenvalues()(i));
    std::sort(slopes.begin(), slopes.end());
    return slopes;
}

// ---------------------------------------------------------------------------
// Finite-difference validation oracles.
// ---------------------------------------------------------------------------

/// One matrix-level check row: central difference of a pullback assembly
/// against the assembled derivative, in relative Frobenius norm.
struct MatrixFdRow {
    double t = 0.0;
    double residual = 0.0;   // ||FD - D||_F / ||D||_F (absolute if D == 0)
    bool exact_zero = false; // derivative identically zero at assembly scale
};

struct MatrixFdReport {
    std::string form;
    std::vector<MatrixFdRow> rows;        // ordered as the given steps
    std::vector<double> orders;           // observed orders between consecutive steps
    double residual_at_smallest = 0.0;
    double min_order = 0.0;
};

enum class FormKind { Stiffness, BoundaryMassAll, BoundaryMassS, VolumeMass };

inline const char* to_string(FormKind k) {
    switch (k) {
        case FormKind::Stiffness: return "stiffness";
        case FormKind::BoundaryMassAll: return "boundary_mass_all";
        case FormKind::BoundaryMassS: return "boundary_mass_S";
        default: return "volume_mass";
    }
}

/// Central differences of the pullback assembly at +-t against the assembled
/// derivative form, over a list of steps (descending recommended).
inline MatrixFdReport fd_matrix_check(const Mesh& mesh, const DisplacementField& psi, FormKind kind,
                                      const std::vector<double>& steps,
                                      const ProblemSpec& spec = ProblemSpec::p1()) {
    if (steps.empty()) throw ArgumentError("fd_matrix_check: need at least one step");
    MatrixFdReport report;
    report.form = to_string(kind);

    auto pullback = [&](double t) -> SpMat {
        switch (kind) {
            case FormKind::Stiffness:
                return pullback_stiffness(mesh, psi, t, spec.stiffness_coefficient(),
                                          spec.volume_quad_degree);
            case FormKind::BoundaryMassAll:
                return pullback_boundary_mass(mesh, BoundaryRegion::All, psi, t, spec.mass_weight(),
                                              spec.edge_quad_points);
            case FormKind::BoundaryMassS:
                return pullback_boundary_mass(mesh, BoundaryRegion::S, psi, t, spec.edge_quad_points);
            default:
                return pullback_volume_mass(mesh, psi, t, spec.mass_weight(), spec.volume_quad_degree);
        }
    };
    SpMat deriv;
    switch (kind) {
        case FormKind::Stiffness:
            deriv = d_stiffness(mesh, psi, spec.stiffness_coefficient(), spec.volume_quad_degree);
            break;
        case FormKind::BoundaryMassAll:
            deriv = d_boundary_mass(mesh, BoundaryRegion::All, psi, spec.mass_weight(), spec.edge_quad_points);
            break;
        case FormKind::BoundaryMassS:
            deriv = d_boundary_mass(mesh, BoundaryRegion::S, psi, spec.edge_quad_points);
            break;
        default:
            deriv = d_volume_mass(mesh, psi, spec.mass_weight(), spec.volume_quad_degree);
            break;
    }
    const double dnorm = deriv.norm();
    const double base_scale = pullback(0.0).norm();
    const bool exact_zero = dnorm <= 1e-12 * std::max(base_scale, 1e-300);

    for (double t : steps) {
        const SpMat fd = SpMat((pullback(t) - pullback(-t)) * (0.5 / t));
        MatrixFdRow row;
        row.t = t;
        row.exact_zero = exact_zero;
        row.residual = exact_zero ? SpMat(fd - deriv).norm() / std::max(base_scale, 1e-300)
                                  : SpMat(fd - deriv).norm() / dnorm;
        report.rows.push_back(row);
    }
    report.residual_at_smallest = report.rows.back().residual;
    for (std::size_t i = 0; i + 1 < report.rows.size(); ++i) {
        const auto& a = report.rows[i];
        const auto& b = report.rows[i + 1];
        if (a.residual > 0.0 && b.residual > 0.0 && a.t != b.t)
            report.orders.push_back(std::log(a.residual / b.residual) / std::log(a.t / b.t));
    }
    report.min_order = report.orders.empty()
                           ? std::numeric_limits<double>::quiet_NaN()
                           : *std::min_element(report.orders.begin(), report.orders.end());
    return report;
}

/// One FD eigenvalue-slope row for a branch of a degenerate group.
struct FdBranchRow {
    double t = 0.0;
    int branch = 0;
    double fd_slope = 0.0;
    double predicted = 0.0;
    double rel_err = 0.0;
    bool flagged = false;   // branch matching was ambiguous at this step
};

struct FdEigenReport {
    std::vector<FdBranchRow> rows;
    std::vector<double> orders;          // per branch, when 3+ steps are given
    double max_rel_err_at_smallest = 0.0;
    double lambda_bar = 0.0;
};

namespace detail {

/// Shared FD branch-slope engine: matches branches of the (possibly
/// degenerate) group to the adapted basis by a-inner-product overlap and
/// central-differences each branch. solver(t) must return the spectrum of the
/// perturbed problem at parameter t with at least max(group)+1 eigenpairs.
inline FdEigenReport fd_branch_slopes(const EigenSolution& base, const EigenGroup& group,
                                      const Eigen::MatrixXd& adapted,
                                      const std::vector<double>& predicted,
                                      const std::function<EigenSolution(double)>& solver,
                                      const std::vector<double>& steps) {
    if (steps.empty()) throw ArgumentError("fd_branch_slopes: need at least one step");
    const int m = static_cast<int>(group.members.size());
    FdEigenReport report;
    report.lambda_bar = group.lambda_bar;

    auto match = [&](const EigenSolution& sol, std::vector<int>& out, bool& clash) {
        out.assign(m, -1);
        clash = false;
        std::vector<bool> used(m, false);
        for (int i = 0; i < m; ++i) {
            double best = -1.0;
            int best_j = -1;
            for (int j = 0; j < m; ++j) {
                const int col = group.members[j];
                const double overlap = std::abs(adapted.col(i).dot(base.A * sol.X.col(col)));
                if (overlap > best) {
                    best = overlap;
                    best_j = j;
                }
            }
            if (used[best_j]) clash = true;
            used[best_j] = true;
            out[i] = group.members[best_j];
        }
    };

    std::vector<std::vector<double>> slopes_per_branch(m);
    for (double t : steps) {
        const EigenSolution plus = solver(t);
        const EigenSolution minus = solver(-t);
        std::vector<int> map_plus, map_minus;
        bool clash_plus = false, clash_minus = false;
        match(plus, map_plus, clash_plus);
        match(minus, map_minus, clash_minus);
        for (int i = 0; i < m; ++i) {
            FdBranchRow row;
            row.t = t;
            row.branch = i;
            row.fd_slope = (plus.lambda(map_plus[i]) - minus.lambda(map_minus[i])) / (2.0 * t);
            row.predicted = predicted[i];
            const double denom = std::max(std::abs(row.predicted), 1e-9 * std::abs(group.lambda_bar));
            row.rel_err = std::abs(row.fd_slope - row.predicted) / denom;
            row.flagged = clash_plus || clash_minus;
            report.rows.push_back(row);
            slopes_per_branch[i].push_back(row.fd_slope);
        }
    }
    double max_err = 0.0;
    for (const auto& row : report.rows)
        if (row.t == steps.back()) max_err = std::max(max_err, row.rel_err);
    report.max_rel_err_at_smallest = max_err;

    if (steps.size() >= 3) {
        for (int i = 0; i < m; ++i) {
            const auto& s = slopes_per_branch[i];
            // fd(t) = slope + c t^p: successive differences scale like t^p
            const double d1 = std::abs(s[s.size() - 3] - s[s.size() - 2]);
            const double d2 = std::abs(s[s.size() - 2] - s[s.size() - 1]);
            const double ratio_t = steps[steps.size() - 3] / steps[steps.size() - 2];
            if (d2 > 0.0 && ratio_t != 1.0) report.orders.push_back(std::log(d1 / d2) / std::log(ratio_t));
        }
    }
    return report;
}

} // namespace detail

/// Independent validation of predict_splitting: re-mesh by deform, re-solve,
/// and central-difference the matched branches.
inline FdEigenReport fd_eigenvalue_check(const ProblemSpec& spec, const Mesh& mesh,
                                         const DisplacementField& psi, const EigenGroup& group,
                                         const std::vector<double>& steps) {
    const int kneed = *std::max_element(group.members.begin(), group.members.end()) + 1;
    const auto base_pair = assemble_problem(mesh, spec);
    const EigenSolution base = solve_eigen(base_pair, kneed);

    const PerturbationMatrix pm = perturbation_matrix(spec, mesh, base, group, psi);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(pm.M);
    const int m = static_cast<int>(group.members.size());
    Eigen::MatrixXd Xg(base.X.rows(), m);
    for (int j = 0; j < m; ++j) Xg.col(j) = base.X.col(group.members[j]);
    const Eigen::MatrixXd adapted = Xg * eig.eigenvectors();
    std::vector<double> predicted(m);
    for (int i = 0; i < m; ++i)
        predicted[i] = -group.lambda_bar * group.lambda_bar * eig.eigenvalues()(i);

    auto solver = [&](double t) {
        const Mesh moved = deform(mesh, psi, t);
        return solve_eigen(assemble_problem(moved, spec), kneed);
    };
    return detail::fd_branch_slopes(base, group, adapted, predicted, solver, steps);
}

// ---------------------------------------------------------------------------
// Exploratory scan of the W-boundary obstruction for volume-mass variants.
// ---------------------------------------------------------------------------

/// Per-edge residuals of the identity grad_W e_r . grad_W e_s + e_r e_s = 0
/// on W, for all pairs r < s of a degenerate group. Purely exploratory: the
/// scan reports data and asserts nothing.
struct WScanReport {
    struct PairProfile {
        int r = 0, s = 0;                     // group member indices
        std::vector<double> edge_residual;    // mean residual per W edge
        double l2 = 0.0;                      // sqrt of integral of residual^2 over W
        double max_abs = 0.0;
    };
    std::vector<int> w_edges;                 // boundary edge indices scanned
    std::vector<Vec2> edge_midpoints;
    std::vector<PairProfile> pairs;
};

inline WScanReport w_obstruction_scan(const ProblemSpec& spec, const EigenSolution& sol,
                                      const EigenGroup& group, const Mesh& mesh) {
    if (spec.boundary_mass_type())
        throw NotApplicableError("w_obstruction_scan: applies to volume-mass variants only");
    WScanReport report;
    for (int e = 0; e < mesh.boundary_count(); ++e)
        if (mesh.boundary[e].tag == BoundaryTag::W) {
            report.w_edges.push_back(e);
            const auto& be = mesh.boundary[e];
            report.edge_midpoints.push_back(0.5 * (mesh.vertices[be.a] + mesh.vertices[be.b]));
        }
    const int m = static_cast<int>(group.members.size());
    const auto& rule = edge_rule(spec.edge_quad_points);
    for (int r = 0; r < m; ++r) {
        for (int s = r + 1; s < m; ++s) {
            WScanReport::PairProfile prof;
            prof.r = group.members[r];
            prof.s = group.members[s];
            double l2sq = 0.0;
            for (int e : report.w_edges) {
                const auto& be = mesh.boundary[e];
                const double len = edge_length(mesh, e);
                const double er_a = sol.X(be.a, prof.r), er_b = sol.X(be.b, prof.r);
                const double es_a = sol.X(be.a, prof.s), es_b = sol.X(be.b, prof.s);
                // tangential gradient of the P1 trace is constant per edge
                const double ger = (er_b - er_a) / len;
                const double ges = (es_b - es_a) / len;
                double mean = 0.0;
                for (const auto& node : rule) {
                    const double er = (1.0 - node.s) * er_a + node.s * er_b;
                    const double es = (1.0 - node.s) * es_a + node.s * es_b;
                    const double val = ger * ges + er * es;
                    mean += node.weight * val;
                    l2sq += node.weight * len * val * val;
                    prof.max_abs = std::max(prof.max_abs, std::abs(val));
                }
                prof.edge_residual.push_back(mean);
            }
            prof.l2 = std::sqrt(l2sq);
            report.pairs.push_back(std::move(prof));
        }
    }
    return report;
}

} // namespace steklov
