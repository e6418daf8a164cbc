#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "steklov/errors.hpp"
#include "steklov/geometry.hpp"
#include "steklov/quadrature.hpp"

namespace steklov {

using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

using ScalarField = std::function<double(const Vec2&)>;
using MatrixField = std::function<Mat2(const Vec2&)>;

inline ScalarField unit_weight() {
    return [](const Vec2&) { return 1.0; };
}
inline MatrixField identity_coefficient() {
    return [](const Vec2&) { return Mat2::Identity().eval(); };
}

enum class Variant { P1, P2, P3a, P3b, P4a, P4b };

inline const char* to_string(Variant v) {
    switch (v) {
        case Variant::P1: return "P1";
        case Variant::P2: return "P2";
        case Variant::P3a: return "P3a";
        case Variant::P3b: return "P3b";
        case Variant::P4a: return "P4a";
        default: return "P4b";
    }
}

inline Variant variant_from_string(const std::string& s) {
    if (s == "P1") return Variant::P1;
    if (s == "P2") return Variant::P2;
    if (s == "P3a") return Variant::P3a;
    if (s == "P3b") return Variant::P3b;
    if (s == "P4a") return Variant::P4a;
    if (s == "P4b") return Variant::P4b;
    throw ArgumentError("unknown problem variant '" + s + "'");
}

/// Which bilinear forms define the problem.
///   P1:  grad-grad + boundary mass          P2:  grad-grad + volume mass
///   P3a: grad-grad + a-weighted bdry mass   P3b: grad-grad + a-weighted volume mass
///   P4a: A-weighted grad-grad + bdry mass   P4b: A-weighted grad-grad + volume mass
/// The right-hand side form is always the unit boundary mass on S.
struct ProblemSpec {
    Variant variant = Variant::P1;
    ScalarField a;      // potential for P3a/P3b
    MatrixField A;      // coefficient for P4a/P4b
    int volume_quad_degree = 2;
    int edge_quad_points = 2;

    bool boundary_mass_type() const {
        return variant == Variant::P1 || variant == Variant::P3a || variant == Variant::P4a;
    }
    bool has_potential() const { return variant == Variant::P3a || variant == Variant::P3b; }
    bool has_matrix_coefficient() const { return variant == Variant::P4a || variant == Variant::P4b; }

    ScalarField mass_weight() const { return has_potential() ? a : unit_weight(); }
    MatrixField stiffness_coefficient() const {
        return has_matrix_coefficient() ? A : identity_coefficient();
    }

    static ProblemSpec p1() { return {}; }
    static ProblemSpec p2() { return {Variant::P2}; }
    static ProblemSpec p3a(ScalarField a) { return {Variant::P3a, std::move(a)}; }
    static ProblemSpec p3b(ScalarField a) { return {Variant::P3b, std::move(a)}; }
    static ProblemSpec p4a(MatrixField A) { return {Variant::P4a, {}, std::move(A)}; }
    static ProblemSpec p4b(MatrixField A) { return {Variant::P4b, {}, std::move(A)}; }
};

enum class BoundaryRegion { All, S, W };

inline const char* to_string(BoundaryRegion r) {
    switch (r) {
        case BoundaryRegion::All: return "all";
        case BoundaryRegion::S: return "S";
        default: return "W";
    }
}

inline bool edge_in_region(const BoundaryEdge& be, BoundaryRegion region) {
    return region == BoundaryRegion::All || (region == BoundaryRegion::S) == (be.tag == BoundaryTag::S);
}

enum class Definiteness { Require, AllowIndefinite };

/// grad-grad form with a matrix coefficient sampled at quadrature points.
/// With Definiteness::Require an indefinite sample raises a coercivity error
/// naming the offending quadrature point.
inline SpMat assemble_stiffness(const Mesh& mesh, const MatrixField& coeff, int quad_degree = 2,
                                Definiteness check = Definiteness::Require) {
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
            Mat2 c = coeff(x);
            c = 0.5 * (c + c.transpose().eval());
            if (check == Definiteness::Require) {
                const double tr = c.trace();
                const double det = c.determinant();
                const double disc = std::sqrt(std::max(0.0, 0.25 * tr * tr - det));
                if (!(0.5 * tr - disc > 0.0))
                    throw CoercivityError("assemble_stiffness: coefficient not positive definite at (" +
                                          std::to_string(x.x()) + "," + std::to_string(x.y()) + ")");
            }
            const double w = node.weight * area;
            for (int p = 0; p < 3; ++p)
                for (int q = 0; q < 3; ++q)
                    trip.emplace_back(tri[p], tri[q], w * g.row(p).dot((c * g.row(q).transpose()).eval()));
        }
    }
    SpMat K(n, n);
    K.setFromTriplets(trip.begin(), trip.end());
    return K;
}

inline SpMat assemble_stiffness(const Mesh& mesh, int quad_degree = 2) {
    // identity coefficient: gradients are constant per element, exact with any rule
    return assemble_stiffness(mesh, identity_coefficient(), quad_degree, Definiteness::AllowIndefinite);
}

/// Weighted P1 mass on the boundary edges of the region, by Gauss quadrature
/// along each edge. Interface vertices are never sampled (interior nodes).
inline SpMat assemble_boundary_mass(const Mesh& mesh, BoundaryRegion region,
                                    const ScalarField& weight, int edge_points = 2) {
    const int n = mesh.vertex_count();
    const auto& rule = edge_rule(edge_points);
    std::vector<Triplet> trip;
    for (const auto& be : mesh.boundary) {
        if (!edge_in_region(be, region)) continue;
        const Vec2& pa = mesh.vertices[be.a];
        const Vec2& pb = mesh.vertices[be.b];
        const double len = (pb - pa).norm();
        const int idx[2] = {be.a, be.b};
        for (const auto& node : rule) {
            const Vec2 x = pa + node.s * (pb - pa);
            const double w = node.weight * len * weight(x);
            const double hat[2] = {1.0 - node.s, node.s};
            for (int p = 0; p < 2; ++p)
                for (int q = 0; q < 2; ++q) trip.emplace_back(idx[p], idx[q], w * hat[p] * hat[q]);
        }
    }
    SpMat B(n, n);
    B.setFromTriplets(trip.begin(), trip.end());
    return B;
}

inline SpMat assemble_boundary_mass(const Mesh& mesh, BoundaryRegion region, int edge_points = 2) {
    return assemble_boundary_mass(mesh, region, unit_weight(), edge_points);
}

/// Weighted P1 volume mass by triangle quadrature.
inline SpMat assemble_volume_mass(const Mesh& mesh, const ScalarField& weight, int quad_degree = 2) {
    const int n = mesh.vertex_count();
    const auto& rule = triangle_rule(quad_degree);
    std::vector<Triplet> trip;
    trip.reserve(mesh.triangles.size() * rule.size() * 9);
    for (int t = 0; t < mesh.triangle_count(); ++t) {
        const auto& tri = mesh.triangles[t];
        const double area = triangle_area(mesh, t);
        for (const auto& node : rule) {
            const Vec2 x = node.bary[0] * mesh.vertices[tri[0]] + node.bary[1] * mesh.vertices[tri[1]] +
                           node.bary[2] * mesh.vertices[tri[2]];
            const double w = node.weight * area * weight(x);
            for (int p = 0; p < 3; ++p)
                for (int q = 0; q < 3; ++q) trip.emplace_back(tri[p], tri[q], w * node.bary[p] * node.bary[q]);
        }
    }
    SpMat M(n, n);
    M.setFromTriplets(trip.begin(), trip.end());
    return M;
}

inline SpMat assemble_volume_mass(const Mesh& mesh, int quad_degree = 2) {
    return assemble_volume_mass(mesh, unit_weight(), quad_degree);
}

/// Left form A_h (symmetric positive definite) and right form B_h (boundary
/// mass on S, positive semidefinite) of the generalized pencil A x = lambda B x.
struct AssembledPair {
    SpMat A;
    SpMat B;
};

/// Assemble the pencil for a problem variant. The potential must be strictly
/// positive and the matrix coefficient uniformly positive definite at every
/// quadrature point; the assembled A_h must pass a Cholesky factorization.
inline AssembledPair assemble_problem(const Mesh& mesh, const ProblemSpec& spec) {
    if (spec.has_potential() && !spec.a) throw ArgumentError("assemble_problem: variant needs a potential a(x)");
    if (spec.has_matrix_coefficient() && !spec.A)
        throw ArgumentError("assemble_problem: variant needs a matrix coefficient A(x)");
    if (spec.has_potential()) {
        // sample positivity where the weight will be used
        const auto weight = spec.a;
        const auto probe = [&](const Vec2& x) {
            const double v = weight(x);
            if (!(v > 0.0))
                throw CoercivityError("assemble_problem: potential a <= 0 at (" + std::to_string(x.x()) +
                                      "," + std::to_string(x.y()) + ")");
            return v;
        };
        if (spec.boundary_mass_type()) {
            for (const auto& be : mesh.boundary)
                for (const auto& node : edge_rule(spec.edge_quad_points))
                    probe(mesh.vertices[be.a] + node.s * (mesh.vertices[be.b] - mesh.vertices[be.a]));
        } else {
            for (int t = 0; t < mesh.triangle_count(); ++t)
                for (const auto& node : triangle_rule(spec.volume_quad_degree)) {
                    const auto& tri = mesh.triangles[t];
                    probe(node.bary[0] * mesh.vertices[tri[0]] + node.bary[1] * mesh.vertices[tri[1]] +
                          node.bary[2] * mesh.vertices[tri[2]]);
                }
        }
    }
    AssembledPair pair;
    const SpMat K = assemble_stiffness(mesh, spec.stiffness_coefficient(), spec.volume_quad_degree,
                                       spec.has_matrix_coefficient() ? Definiteness::Require
                                                                     : Definiteness::AllowIndefinite);
    const SpMat mass = spec.boundary_mass_type()
                           ? assemble_boundary_mass(mesh, BoundaryRegion::All, spec.mass_weight(),
                                                    spec.edge_quad_points)
                           : assemble_volume_mass(mesh, spec.mass_weight(), spec.volume_quad_degree);
    pair.A = K + mass;
    pair.B = assemble_boundary_mass(mesh, BoundaryRegion::S, spec.edge_quad_points);

    Eigen::SimplicialLLT<SpMat> llt(pair.A);
    if (llt.info() != Eigen::Success)
        throw CoercivityError("assemble_problem: left form is not positive definite");
    return pair;
}

/// Largest |A - A^T| entry relative to the largest |A| entry.
inline double symmetry_defect(const SpMat& m) {
    const SpMat diff = SpMat(m.transpose()) - m;
    double num = 0.0, den = 0.0;
    for (int k = 0; k < diff.outerSize(); ++k)
        for (SpMat::InnerIterator it(diff, k); it; ++it) num = std::max(num, std::abs(it.value()));
    for (int k = 0; k < m.outerSize(); ++k)
        for (SpMat::InnerIterator it(m, k); it; ++it) den = std::max(den, std::abs(it.value()));
    return den > 0.0 ? num / den : num;
}

} // namespace steklov
