#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "steklov/errors.hpp"
#include "steklov/forms.hpp"
#include "steklov/shape_derivative.hpp"
#include "steklov/spectrum.hpp"

namespace steklov {

// ---------------------------------------------------------------------------
// Coefficient perturbations: a scalar potential added on the boundary, a
// scalar potential added in the volume, or a symmetric matrix field added to
// the principal coefficient. Perturbations are sampled at the same quadrature
// points as the base coefficients, so the perturbation matrices below are
// literally the derivatives of the assembled pencil.
// ---------------------------------------------------------------------------

enum class CoeffKind { BoundaryPotential, VolumePotential, MatrixCoefficient };

inline const char* to_string(CoeffKind k) {
    switch (k) {
        case CoeffKind::BoundaryPotential: return "boundary_potential";
        case CoeffKind::VolumePotential: return "volume_potential";
        default: return "matrix_coefficient";
    }
}

struct CoefficientPerturbation {
    CoeffKind kind = CoeffKind::BoundaryPotential;
    ScalarField b;                    // potentials; for indicator_s this is the S-indicator
    MatrixField B;                    // matrix kind
    bool s_indicator = false;         // potential equal to the indicator of S (resolved by tags)
    double sup_norm_estimate = 0.0;   // >= max sampled magnitude; C^0 (or C^1) smallness proxy
    json spec;
};

/// Construct a coefficient perturbation from its serialized spec. Families:
///   angular_harmonic: {k, phase, amplitude}      b = amp cos(k theta - phase)
///   constant:        {c}                         b = c
///   indicator_s:     {amplitude}                 b = amp 1_S   (boundary kind only)
///   matrix_harmonic: {k, phase, amplitude, structure in {iso, diag, offdiag}}
///                                                B = amp cos(k theta - phase) E
/// "kind" selects boundary_potential / volume_potential / matrix_coefficient.
/// The sup-norm estimate is evaluated on the given sample points (plus the
/// analytic amplitude, which dominates for these families).
inline CoefficientPerturbation make_coeff_perturbation(const json& spec,
                                                       const std::vector<Vec2>& samples = {}) {
    CoefficientPerturbation out;
    out.spec = spec;
    const std::string kind = spec.value("kind", "boundary_potential");
    if (kind == "boundary_potential") out.kind = CoeffKind::BoundaryPotential;
    else if (kind == "volume_potential") out.kind = CoeffKind::VolumePotential;
    else if (kind == "matrix_coefficient") out.kind = CoeffKind::MatrixCoefficient;
    else throw ArgumentError("unknown coefficient perturbation kind '" + kind + "'");

    const std::string family = spec.at("family").get<std::string>();
    const double amp = spec.value("amplitude", 1.0);
    if (family == "angular_harmonic") {
        const double k = spec.at("k").get<double>();
        const double phase = spec.value("phase", 0.0);
        out.b = [k, phase, amp](const Vec2& x) {
            return amp * std::cos(k * std::atan2(x.y(), x.x()) - phase);
        };
        out.sup_norm_estimate = std::abs(amp);
    } else if (family == "constant") {
        const double c = spec.value("c", amp);
        out.b = [c](const Vec2&) { return c; };
        out.sup_norm_estimate = std::abs(c);
    } else if (family == "indicator_s") {
        if (out.kind != CoeffKind::BoundaryPotential)
            throw ArgumentError("indicator_s is a boundary potential");
        out.s_indicator = true;
        out.b = [amp](const Vec2&) { return amp; };
        out.sup_norm_estimate = std::abs(amp);
    } else if (family == "matrix_harmonic") {
        const double k = spec.at("k").get<double>();
        const double phase = spec.value("phase", 0.0);
        const std::string structure = spec.value("structure", "iso");
        Mat2 E;
        if (structure == "iso") E = Mat2::Identity();
        else if (structure == "diag") E = (Mat2() << 1, 0, 0, -1).finished();
        else if (structure == "offdiag") E = (Mat2() << 0, 1, 1, 0).finished();
        else throw ArgumentError("matrix_harmonic: unknown structure '" + structure + "'");
        out.B = [k, phase, amp, E](const Vec2& x) {
            return (amp * std::cos(k * std::atan2(x.y(), x.x()) - phase) * E).eval();
        };
        out.sup_norm_estimate = std::abs(amp);
    } else {
        throw ArgumentError("make_coeff_perturbation: unknown family '" + family + "'");
    }
    if (out.kind == CoeffKind::MatrixCoefficient && !out.B)
        throw ArgumentError("matrix_coefficient kind needs a matrix family");
    if (out.kind != CoeffKind::MatrixCoefficient && !out.b)
        throw ArgumentError("potential kinds need a scalar family");
    for (const auto& x : samples) {
        const double v = out.B ? out.B(x).cwiseAbs().maxCoeff() : std::abs(out.b(x));
        out.sup_norm_estimate = std::max(out.sup_norm_estimate, v);
    }
    return out;
}

inline CoefficientPerturbation scale_coeff_perturbation(const CoefficientPerturbation& pert,
                                                        double alpha) {
    CoefficientPerturbation out = pert;
    if (pert.b) {
        auto b = pert.b;
        out.b = [b, alpha](const Vec2& x) { return alpha * b(x); };
    }
    if (pert.B) {
        auto B = pert.B;
        out.B = [B, alpha](const Vec2& x) { return (alpha * B(x)).eval(); };
    }
    out.sup_norm_estimate = std::abs(alpha) * pert.sup_norm_estimate;
    out.spec = json{{"family", "scaled"}, {"coef", alpha}, {"base", pert.spec}};
    if (pert.spec.contains("kind")) out.spec["kind"] = pert.spec["kind"];
    return out;
}

// ---------------------------------------------------------------------------
// No-splitting matrices for the three coefficient-perturbation classes.
// ---------------------------------------------------------------------------

namespace detail {

inline Eigen::MatrixXd group_columns(const EigenSolution& sol, const EigenGroup& group) {
    const int m = static_cast<int>(group.members.size());
    Eigen::MatrixXd Xg(sol.X.rows(), m);
    for (int j = 0; j < m; ++j) {
        const int idx = group.members[j];
        if (idx < 0 || idx >= sol.count())
            throw ArgumentError("group member " + std::to_string(idx) + " not in solution");
        Xg.col(j) = sol.X.col(idx);
    }
    return Xg;
}

inline PerturbationMatrix project_group(const EigenSolution& sol, const EigenGroup& group,
                                        const SpMat& form, double factor, const json& spec) {
    const Eigen::MatrixXd Xg = group_columns(sol, group);
    PerturbationMatrix out;
    out.lambda_bar = group.lambda_bar;
    out.mu_bar = group.mu_bar;
    out.members = group.members;
    out.perturbation = spec;
    out.M = factor * (Xg.transpose() * (form * Xg));
    out.M = 0.5 * (out.M + out.M.transpose().eval());
    out.deviation = nosplit_deviation(out.M);
    return out;
}

} // namespace detail

/// M_ij = -mu_bar int_{boundary} b e_i e_j, for boundary-potential problems.
inline PerturbationMatrix pot_down_matrix(const Mesh& mesh, const EigenSolution& sol,
                                          const EigenGroup& group, const CoefficientPerturbation& b,
                                          int edge_points = 2) {
    if (b.kind != CoeffKind::BoundaryPotential)
        throw ArgumentError("pot_down_matrix: perturbation kind must be boundary_potential");
    const SpMat form = assemble_boundary_mass(
        mesh, b.s_indicator ? BoundaryRegion::S : BoundaryRegion::All, b.b, edge_points);
    return detail::project_group(sol, group, form, -group.mu_bar, b.spec);
}

/// M_ij = -mu_bar int_Omega b e_i e_j, for volume-potential problems.
inline PerturbationMatrix pot_up_matrix(const Mesh& mesh, const EigenSolution& sol,
                                        const EigenGroup& group, const CoefficientPerturbation& b,
                                        int quad_degree = 2) {
    if (b.kind != CoeffKind::VolumePotential)
        throw ArgumentError("pot_up_matrix: perturbation kind must be volume_potential");
    const SpMat form = assemble_volume_mass(mesh, b.b, quad_degree);
    return detail::project_group(sol, group, form, -group.mu_bar, b.spec);
}

/// M_rs = -mu_bar int_Omega sum_ij B_ij d_i e_r d_j e_s, for the anisotropic
/// divergence-form problems (and their A = I base cases).
inline PerturbationMatrix aniso_matrix(const Mesh& mesh, const EigenSolution& sol,
                                       const EigenGroup& group, const CoefficientPerturbation& B,
                                       int quad_degree = 2) {
    if (B.kind != CoeffKind::MatrixCoefficient)
        throw ArgumentError("aniso_matrix: perturbation kind must be matrix_coefficient");
    const SpMat form = assemble_stiffness(mesh, B.B, quad_degree, Definiteness::AllowIndefinite);
    return detail::project_group(sol, group, form, -group.mu_bar, B.spec);
}

/// Dispatch on the perturbation kind.
inline PerturbationMatrix coeff_perturbation_matrix(const Mesh& mesh, const EigenSolution& sol,
                                                    const EigenGroup& group,
                                                    const CoefficientPerturbation& pert,
                                                    const ProblemSpec& spec) {
    switch (pert.kind) {
        case CoeffKind::BoundaryPotential: return pot_down_matrix(mesh, sol, group, pert, spec.edge_quad_points);
        case CoeffKind::VolumePotential: return pot_up_matrix(mesh, sol, group, pert, spec.volume_quad_degree);
        default: return aniso_matrix(mesh, sol, group, pert, spec.volume_quad_degree);
    }
}

/// The problem with coefficients shifted by t times the perturbation.
inline ProblemSpec perturbed_spec(const ProblemSpec& spec, const CoefficientPerturbation& pert,
                                  double t, const Mesh& mesh) {
    ProblemSpec out = spec;
    switch (pert.kind) {
        case CoeffKind::BoundaryPotential: {
            if (!spec.boundary_mass_type())
                throw ArgumentError("boundary potential perturbation needs a boundary-mass variant");
            if (spec.has_matrix_coefficient())
                throw ArgumentError("boundary potential perturbation on an anisotropic variant is unsupported");
            // indicator of S as a spatial weight: resolved by distance to the S edges
            ScalarField add = pert.b;
            if (pert.s_indicator) {
                // build an S-membership test from the mesh tags: quadrature points on
                // W edges must see 0 (points never sit on the interface vertices)
                std::vector<std::pair<Vec2, Vec2>> s_edges;
                for (const auto& be : mesh.boundary)
                    if (be.tag == BoundaryTag::S)
                        s_edges.emplace_back(mesh.vertices[be.a], mesh.vertices[be.b]);
                auto base = pert.b;
                add = [s_edges, base](const Vec2& x) {
                    for (const auto& [a, b] : s_edges) {
                        const Vec2 d = b - a;
                        const double len2 = d.squaredNorm();
                        const double u = std::clamp(d.dot(x - a) / len2, 0.0, 1.0);
                        if ((a + u * d - x).norm() < 1e-9 * std::sqrt(len2)) return base(x);
                    }
                    return 0.0;
                };
            }
            ScalarField a0 = spec.has_potential() ? spec.a : unit_weight();
            out.variant = Variant::P3a;
            out.a = [a0, add, t](const Vec2& x) { return a0(x) + t * add(x); };
            return out;
        }
        case CoeffKind::VolumePotential: {
            if (spec.boundary_mass_type())
                throw ArgumentError("volume potential perturbation needs a volume-mass variant");
            if (spec.has_matrix_coefficient())
                throw ArgumentError("volume potential perturbation on an anisotropic variant is unsupported");
            ScalarField a0 = spec.has_potential() ? spec.a : unit_weight();
            auto add = pert.b;
            out.variant = Variant::P3b;
            out.a = [a0, add, t](const Vec2& x) { return a0(x) + t * add(x); };
            return out;
        }
        default: {
            if (spec.has_potential())
                throw ArgumentError("matrix perturbation on a potential variant is unsupported");
            MatrixField A0 = spec.has_matrix_coefficient() ? spec.A : identity_coefficient();
            auto add = pert.B;
            out.variant = spec.boundary_mass_type() ? Variant::P4a : Variant::P4b;
            out.A = [A0, add, t](const Vec2& x) { return (A0(x) + t * add(x)).eval(); };
            return out;
        }
    }
}

/// FD validation of the coefficient derivative: re-assemble with the shifted
/// coefficients, re-solve, central-difference the matched branches.
inline FdEigenReport coeff_fd_check(const ProblemSpec& spec, const Mesh& mesh,
                                    const CoefficientPerturbation& pert, const EigenGroup& group,
                                    const std::vector<double>& steps) {
    const int kneed = *std::max_element(group.members.begin(), group.members.end()) + 1;
    const auto base_pair = assemble_problem(mesh, spec);
    const EigenSolution base = solve_eigen(base_pair, kneed);

    const PerturbationMatrix pm = coeff_perturbation_matrix(mesh, base, group, pert, spec);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(pm.M);
    const Eigen::MatrixXd adapted = detail::group_columns(base, group) * eig.eigenvectors();
    const int m = static_cast<int>(group.members.size());
    std::vector<double> predicted(m);
    for (int i = 0; i < m; ++i)
        predicted[i] = -group.lambda_bar * group.lambda_bar * eig.eigenvalues()(i);

    auto solver = [&](double t) {
        try {
            return solve_eigen(assemble_problem(mesh, perturbed_spec(spec, pert, t, mesh)), kneed);
        } catch (const CoercivityError& err) {
            throw CoercivityError("coeff_fd_check: coercivity lost at t = " + std::to_string(t) +
                                  " (" + err.what() + ")");
        }
    };
    return detail::fd_branch_slopes(base, group, adapted, predicted, solver, steps);
}

} // namespace steklov
