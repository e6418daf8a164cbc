#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "steklov/errors.hpp"

namespace steklov {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

enum class BoundaryTag : std::uint8_t { S, W };

inline const char* to_string(BoundaryTag t) { return t == BoundaryTag::S ? "S" : "W"; }

inline BoundaryTag boundary_tag_from_string(const std::string& s) {
    if (s == "S") return BoundaryTag::S;
    if (s == "W") return BoundaryTag::W;
    throw ArgumentError("unknown boundary tag '" + s + "'");
}

/// Oriented boundary edge: the domain lies on the left of a -> b.
struct BoundaryEdge {
    int a = -1;
    int b = -1;
    BoundaryTag tag = BoundaryTag::S;
};

/// Triangulated 2D domain with a tagged boundary partition. Immutable after
/// construction; all operations that change geometry return a new mesh.
struct Mesh {
    std::vector<Vec2> vertices;
    std::vector<std::array<int, 3>> triangles; // counterclockwise
    std::vector<BoundaryEdge> boundary;
    std::string family;                        // generation metadata
    std::map<std::string, double> params;

    int vertex_count() const { return static_cast<int>(vertices.size()); }
    int triangle_count() const { return static_cast<int>(triangles.size()); }
    int boundary_count() const { return static_cast<int>(boundary.size()); }
};

inline double signed_area(const Vec2& p0, const Vec2& p1, const Vec2& p2) {
    const Vec2 u = p1 - p0, v = p2 - p0;
    return 0.5 * (u.x() * v.y() - u.y() * v.x());
}

inline double triangle_area(const Mesh& mesh, int t) {
    const auto& tri = mesh.triangles[t];
    return signed_area(mesh.vertices[tri[0]], mesh.vertices[tri[1]], mesh.vertices[tri[2]]);
}

inline double total_area(const Mesh& mesh) {
    double area = 0.0;
    for (int t = 0; t < mesh.triangle_count(); ++t) area += triangle_area(mesh, t);
    return area;
}

/// Gradients of the three P1 hat functions on triangle t (rows of the result).
inline Eigen::Matrix<double, 3, 2> hat_gradients(const Mesh& mesh, int t) {
    const auto& tri = mesh.triangles[t];
    const Vec2& p0 = mesh.vertices[tri[0]];
    const Vec2& p1 = mesh.vertices[tri[1]];
    const Vec2& p2 = mesh.vertices[tri[2]];
    Mat2 jac;
    jac.col(0) = p1 - p0;
    jac.col(1) = p2 - p0;
    const Mat2 inv = jac.inverse();
    Eigen::Matrix<double, 3, 2> g;
    g.row(1) = inv.row(0);
    g.row(2) = inv.row(1);
    g.row(0) = -g.row(1) - g.row(2);
    return g;
}

inline double edge_length(const Mesh& mesh, int e) {
    const auto& be = mesh.boundary[e];
    return (mesh.vertices[be.b] - mesh.vertices[be.a]).norm();
}

/// Outward unit normal of boundary edge e. With the domain on the left of
/// a -> b this is the edge tangent rotated by -90 degrees.
inline Vec2 boundary_normal(const Mesh& mesh, int e) {
    if (e < 0 || e >= mesh.boundary_count())
        throw ArgumentError("boundary_normal: edge index " + std::to_string(e) +
                            " out of range [0," + std::to_string(mesh.boundary_count()) + ")");
    const auto& be = mesh.boundary[e];
    const Vec2 tau = mesh.vertices[be.b] - mesh.vertices[be.a];
    const double len = tau.norm();
    if (!(len > 0.0)) throw ArgumentError("boundary_normal: degenerate edge " + std::to_string(e));
    return Vec2(tau.y(), -tau.x()) / len;
}

inline double boundary_perimeter(const Mesh& mesh) {
    double p = 0.0;
    for (int e = 0; e < mesh.boundary_count(); ++e) p += edge_length(mesh, e);
    return p;
}

/// Structural checks behind the Mesh invariants. Throws on the first failure.
inline void validate_mesh(const Mesh& mesh) {
    for (int t = 0; t < mesh.triangle_count(); ++t) {
        for (int v : mesh.triangles[t])
            if (v < 0 || v >= mesh.vertex_count())
                throw ArgumentError("mesh: triangle " + std::to_string(t) + " references bad vertex");
        if (!(triangle_area(mesh, t) > 0.0))
            throw ArgumentError("mesh: triangle " + std::to_string(t) + " is not counterclockwise");
    }
    // Directed edge -> owning triangle count. Each boundary edge must be a
    // directed edge of exactly one triangle (so the domain lies on its left),
    // and each unmatched triangle edge must appear in the boundary list.
    std::map<std::pair<int, int>, int> directed;
    for (const auto& tri : mesh.triangles)
        for (int k = 0; k < 3; ++k) directed[{tri[k], tri[(k + 1) % 3]}]++;
    int s_count = 0, w_count = 0;
    std::map<int, int> out_deg, in_deg;
    for (const auto& be : mesh.boundary) {
        auto it = directed.find({be.a, be.b});
        if (it == directed.end() || it->second != 1)
            throw ArgumentError("mesh: boundary edge (" + std::to_string(be.a) + "," +
                                std::to_string(be.b) + ") is not a directed edge of exactly one triangle");
        if (directed.count({be.b, be.a}))
            throw ArgumentError("mesh: boundary edge (" + std::to_string(be.a) + "," +
                                std::to_string(be.b) + ") is interior");
        (be.tag == BoundaryTag::S ? s_count : w_count)++;
        out_deg[be.a]++;
        in_deg[be.b]++;
    }
    for (const auto& [edge, count] : directed) {
        if (count > 1) throw ArgumentError("mesh: repeated directed edge");
        if (!directed.count({edge.second, edge.first})) {
            bool listed = false;
            for (const auto& be : mesh.boundary)
                if (be.a == edge.first && be.b == edge.second) { listed = true; break; }
            if (!listed)
                throw ArgumentError("mesh: triangle edge (" + std::to_string(edge.first) + "," +
                                    std::to_string(edge.second) + ") is exposed but not in the boundary list");
        }
    }
    if (s_count == 0 || w_count == 0)
        throw PartitionError("mesh: boundary partition needs nonempty S and W (got " +
                             std::to_string(s_count) + " S, " + std::to_string(w_count) + " W)");
    for (const auto& [v, d] : out_deg)
        if (d != 1 || in_deg[v] != 1)
            throw ArgumentError("mesh: boundary edges do not form closed polylines at vertex " +
                                std::to_string(v));
    for (const auto& [v, d] : in_deg)
        if (!out_deg.count(v))
            throw ArgumentError("mesh: boundary edges do not form closed polylines at vertex " +
                                std::to_string(v));
}

/// Structured annulus triangulation. Outer circle is tagged S, inner circle W.
inline Mesh build_annulus(double r_inner, double r_outer, int n_radial, int n_angular) {
    if (!(r_inner > 0.0) || !(r_inner < r_outer))
        throw ArgumentError("build_annulus: need 0 < r_inner < r_outer");
    if (n_radial < 1) throw ArgumentError("build_annulus: n_radial must be >= 1");
    if (n_angular < 8) throw ArgumentError("build_annulus: n_angular must be >= 8");

    Mesh mesh;
    mesh.family = "annulus";
    mesh.params = {{"r_inner", r_inner}, {"r_outer", r_outer},
                   {"n_radial", double(n_radial)}, {"n_angular", double(n_angular)}};
    mesh.vertices.reserve(std::size_t(n_radial + 1) * n_angular);
    for (int i = 0; i <= n_radial; ++i) {
        const double r = r_inner + (r_outer - r_inner) * i / n_radial;
        for (int j = 0; j < n_angular; ++j) {
            const double th = 2.0 * M_PI * j / n_angular;
            mesh.vertices.emplace_back(r * std::cos(th), r * std::sin(th));
        }
    }
    auto vid = [n_angular](int i, int j) { return i * n_angular + ((j % n_angular) + n_angular) % n_angular; };
    for (int i = 0; i < n_radial; ++i) {
        for (int j = 0; j < n_angular; ++j) {
            const int a = vid(i, j), b = vid(i, j + 1), c = vid(i + 1, j), d = vid(i + 1, j + 1);
            mesh.triangles.push_back({a, d, b});
            mesh.triangles.push_back({a, c, d});
        }
    }
    for (int j = 0; j < n_angular; ++j) {
        mesh.boundary.push_back({vid(0, j + 1), vid(0, j), BoundaryTag::W});       // inner, clockwise
        mesh.boundary.push_back({vid(n_radial, j), vid(n_radial, j + 1), BoundaryTag::S}); // outer, ccw
    }
    validate_mesh(mesh);
    return mesh;
}

/// Edge predicate used to tag rectangle boundary edges, fed the edge midpoint.
using TagRule = std::function<BoundaryTag(const Vec2&)>;

/// Named tag rules for configs: which rectangle sides belong to S.
inline TagRule rectangle_tag_rule(const std::string& name, double width, double height) {
    const double eps = 1e-12 * std::max(width, height);
    if (name == "top_s")
        return [=](const Vec2& m) { return m.y() > height - eps ? BoundaryTag::S : BoundaryTag::W; };
    if (name == "bottom_s")
        return [=](const Vec2& m) { return m.y() < eps ? BoundaryTag::S : BoundaryTag::W; };
    if (name == "y_extremes_s")
        return [=](const Vec2& m) {
            return (m.y() < eps || m.y() > height - eps) ? BoundaryTag::S : BoundaryTag::W;
        };
    if (name == "left_s")
        return [=](const Vec2& m) { return m.x() < eps ? BoundaryTag::S : BoundaryTag::W; };
    if (name == "right_w")
        return [=](const Vec2& m) { return m.x() > width - eps ? BoundaryTag::W : BoundaryTag::S; };
    throw ArgumentError("rectangle_tag_rule: unknown rule '" + name + "'");
}

/// Structured rectangle triangulation on [0,width] x [0,height].
inline Mesh build_rectangle(double width, double height, int nx, int ny, const TagRule& rule,
                            const std::string& rule_name = "") {
    if (!(width > 0.0) || !(height > 0.0)) throw ArgumentError("build_rectangle: dimensions must be positive");
    if (nx < 1 || ny < 1) throw ArgumentError("build_rectangle: cell counts must be >= 1");

    Mesh mesh;
    mesh.family = "rectangle";
    mesh.params = {{"width", width}, {"height", height}, {"nx", double(nx)}, {"ny", double(ny)}};
    auto vid = [nx](int i, int j) { return j * (nx + 1) + i; };
    for (int j = 0; j <= ny; ++j)
        for (int i = 0; i <= nx; ++i)
            mesh.vertices.emplace_back(width * i / nx, height * j / ny);
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            const int a = vid(i, j), b = vid(i + 1, j), c = vid(i + 1, j + 1), d = vid(i, j + 1);
            mesh.triangles.push_back({a, b, c});
            mesh.triangles.push_back({a, c, d});
        }
    }
    auto add_edge = [&](int va, int vb) {
        const Vec2 mid = 0.5 * (mesh.vertices[va] + mesh.vertices[vb]);
        mesh.boundary.push_back({va, vb, rule(mid)});
    };
    for (int i = 0; i < nx; ++i) add_edge(vid(i, 0), vid(i + 1, 0));           // bottom, ccw
    for (int j = 0; j < ny; ++j) add_edge(vid(nx, j), vid(nx, j + 1));         // right
    for (int i = nx; i > 0; --i) add_edge(vid(i, ny), vid(i - 1, ny));         // top
    for (int j = ny; j > 0; --j) add_edge(vid(0, j), vid(0, j - 1));           // left
    if (!rule_name.empty()) mesh.family = "rectangle:" + rule_name;
    int s = 0, w = 0;
    for (const auto& be : mesh.boundary) (be.tag == BoundaryTag::S ? s : w)++;
    if (s == 0 || w == 0)
        throw PartitionError("build_rectangle: tag rule leaves " + std::string(s == 0 ? "S" : "W") + " empty");
    validate_mesh(mesh);
    return mesh;
}

} // namespace steklov
