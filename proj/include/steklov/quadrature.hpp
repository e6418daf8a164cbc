#pragma once

#include <array>
#include <vector>

#include <Eigen/Dense>

#include "steklov/errors.hpp"

namespace steklov {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

/// Quadrature node in barycentric coordinates with weight normalized so that
/// the weights of a rule sum to one (integrals are scaled by element area).
struct TriQuadNode {
    std::array<double, 3> bary;
    double weight;
};

/// Symmetric triangle rules, exact for polynomials up to the requested degree.
/// All nodes are strictly interior, so integrands are never sampled at
/// vertices (in particular never at boundary-tag interface vertices).
inline const std::vector<TriQuadNode>& triangle_rule(int degree) {
    static const std::vector<TriQuadNode> deg1 = {
        {{1.0 / 3, 1.0 / 3, 1.0 / 3}, 1.0},
    };
    static const std::vector<TriQuadNode> deg2 = {
        {{2.0 / 3, 1.0 / 6, 1.0 / 6}, 1.0 / 3},
        {{1.0 / 6, 2.0 / 3, 1.0 / 6}, 1.0 / 3},
        {{1.0 / 6, 1.0 / 6, 2.0 / 3}, 1.0 / 3},
    };
    static const std::vector<TriQuadNode> deg4 = [] {
        std::vector<TriQuadNode> r;
        const double a1 = 0.816847572980459, b1 = 0.091576213509771, w1 = 0.109951743655322;
        const double a2 = 0.108103018168070, b2 = 0.445948490915965, w2 = 0.223381589678011;
        for (auto [a, b, w] : {std::array<double, 3>{a1, b1, w1}, std::array<double, 3>{a2, b2, w2}}) {
            r.push_back({{a, b, b}, w});
            r.push_back({{b, a, b}, w});
            r.push_back({{b, b, a}, w});
        }
        return r;
    }();
    static const std::vector<TriQuadNode> deg5 = [] {
        std::vector<TriQuadNode> r;
        r.push_back({{1.0 / 3, 1.0 / 3, 1.0 / 3}, 0.225});
        const double a1 = 0.059715871789770, b1 = 0.470142064105115, w1 = 0.132394152788506;
        const double a2 = 0.797426985353087, b2 = 0.101286507323456, w2 = 0.125939180544827;
        for (auto [a, b, w] : {std::array<double, 3>{a1, b1, w1}, std::array<double, 3>{a2, b2, w2}}) {
            r.push_back({{a, b, b}, w});
            r.push_back({{b, a, b}, w});
            r.push_back({{b, b, a}, w});
        }
        return r;
    }();
    if (degree <= 1) return deg1;
    if (degree == 2) return deg2;
    if (degree <= 4) return deg4;
    if (degree == 5) return deg5;
    throw ArgumentError("triangle_rule: no rule of degree " + std::to_string(degree));
}

/// Gauss-Legendre node on the unit interval [0,1].
struct EdgeQuadNode {
    double s;
    double weight;
};

/// Gauss-Legendre rules on [0,1], exact for degree 2n-1. Nodes are interior,
/// so edge integrands are never evaluated at edge endpoints.
inline const std::vector<EdgeQuadNode>& edge_rule(int points) {
    static const std::vector<EdgeQuadNode> g1 = {{0.5, 1.0}};
    static const std::vector<EdgeQuadNode> g2 = [] {
        const double d = 0.5 / std::sqrt(3.0);
        return std::vector<EdgeQuadNode>{{0.5 - d, 0.5}, {0.5 + d, 0.5}};
    }();
    static const std::vector<EdgeQuadNode> g3 = [] {
        const double d = 0.5 * std::sqrt(3.0 / 5.0);
        return std::vector<EdgeQuadNode>{
            {0.5 - d, 5.0 / 18}, {0.5, 4.0 / 9}, {0.5 + d, 5.0 / 18}};
    }();
    static const std::vector<EdgeQuadNode> g4 = [] {
        const double x1 = 0.339981043584856, x2 = 0.861136311594053;
        const double w1 = 0.652145154862546, w2 = 0.347854845137454;
        return std::vector<EdgeQuadNode>{
            {0.5 * (1 - x2), 0.5 * w2}, {0.5 * (1 - x1), 0.5 * w1},
            {0.5 * (1 + x1), 0.5 * w1}, {0.5 * (1 + x2), 0.5 * w2}};
    }();
    static const std::vector<EdgeQuadNode> g5 = [] {
        const double x1 = 0.538469310105683, x2 = 0.906179845938664;
        const double w0 = 0.568888888888889, w1 = 0.478628670499366, w2 = 0.236926885056189;
        return std::vector<EdgeQuadNode>{
            {0.5 * (1 - x2), 0.5 * w2}, {0.5 * (1 - x1), 0.5 * w1}, {0.5, 0.5 * w0},
            {0.5 * (1 + x1), 0.5 * w1}, {0.5 * (1 + x2), 0.5 * w2}};
    }();
    switch (points) {
        case 1: return g1;
        case 2: return g2;
        case 3: return g3;
        case 4: return g4;
        case 5: return g5;
        default: throw ArgumentError("edge_rule: no rule with " + std::to_string(points) + " points");
    }
}

/// Gauss-Legendre integration of f over [a,b] with n panels of 5 points each.
template <class F>
double integrate_1d(F&& f, double a, double b, int panels = 64) {
    const auto& rule = edge_rule(5);
    double total = 0.0;
    const double h = (b - a) / panels;
    for (int p = 0; p < panels; ++p) {
        const double lo = a + p * h;
        for (const auto& node : rule) total += h * node.weight * f(lo + node.s * h);
    }
    return total;
}

} // namespace steklov
