#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "steklov/errors.hpp"
#include "steklov/geometry.hpp"

namespace steklov {

using json = nlohmann::json;

/// Where the field may touch the boundary of the domain it will deform.
/// The class is declared by the constructor and enforced by construction
/// (supports are chosen so value and jacobian vanish on the excluded part).
enum class FieldSupport { Interior, MeetsOnlyS, MeetsOnlyW, Global };

inline const char* to_string(FieldSupport s) {
    switch (s) {
        case FieldSupport::Interior: return "interior";
        case FieldSupport::MeetsOnlyS: return "meets_only_S";
        case FieldSupport::MeetsOnlyW: return "meets_only_W";
        default: return "global";
    }
}

inline FieldSupport field_support_from_string(const std::string& s) {
    if (s == "interior") return FieldSupport::Interior;
    if (s == "meets_only_S") return FieldSupport::MeetsOnlyS;
    if (s == "meets_only_W") return FieldSupport::MeetsOnlyW;
    if (s == "global") return FieldSupport::Global;
    throw ArgumentError("unknown field support class '" + s + "'");
}

/// C^2 vector field with analytic Jacobian. Value semantics; evaluators are
/// pure, so fields are safe to share across threads.
struct DisplacementField {
    json spec;   // family name + numeric parameters, reconstructible via field_library
    FieldSupport support = FieldSupport::Global;
    std::function<Vec2(const Vec2&)> value;
    std::function<Mat2(const Vec2&)> jacobian;

    double divergence(const Vec2& x) const { return jacobian(x).trace(); }
};

// ---------------------------------------------------------------------------
// C^2 profile pieces built from the quintic smoothstep.
// ---------------------------------------------------------------------------

namespace profile {

// P(0)=0, P(1)=1, P'=P''=0 at both ends.
inline double smoothstep(double u) { return u * u * u * (10.0 + u * (6.0 * u - 15.0)); }
inline double smoothstep_d(double u) { return 30.0 * u * u * (u - 1.0) * (u - 1.0); }
inline double smoothstep_dd(double u) { return 60.0 * u * (u - 1.0) * (2.0 * u - 1.0); }

/// Bump supported on |s|<1 with unit peak; C^2 across the support edge and peak.
inline double bump(double s) {
    const double a = std::abs(s);
    return a < 1.0 ? smoothstep(1.0 - a) : 0.0;
}
inline double bump_d(double s) {
    const double a = std::abs(s);
    if (a >= 1.0) return 0.0;
    return (s < 0 ? 1.0 : -1.0) * smoothstep_d(1.0 - a);
}

/// Monotone ramp: 0 for u<=0, 1 for u>=1.
inline double ramp(double u) { return u <= 0.0 ? 0.0 : (u >= 1.0 ? 1.0 : smoothstep(u)); }
inline double ramp_d(double u) { return (u <= 0.0 || u >= 1.0) ? 0.0 : smoothstep_d(u); }

} // namespace profile

namespace detail {

struct RadialProfile {
    // profile kind: 0 = bump around r_center, 1 = ramp rising across it
    int kind = 0;
    double r_center = 1.0;
    double width = 0.5;
    double amplitude = 1.0;

    double eta(double r) const {
        const double s = (r - r_center) / width;
        return kind == 0 ? amplitude * profile::bump(s)
                         : amplitude * profile::ramp(0.5 * (s + 1.0));
    }
    double deta(double r) const {
        const double s = (r - r_center) / width;
        return kind == 0 ? amplitude * profile::bump_d(s) / width
                         : amplitude * profile::ramp_d(0.5 * (s + 1.0)) * 0.5 / width;
    }
};

inline int profile_kind(const json& spec) {
    const std::string p = spec.value("profile", "bump");
    if (p == "bump") return 0;
    if (p == "ramp") return 1;
    throw ArgumentError("field profile must be 'bump' or 'ramp', got '" + p + "'");
}

} // namespace detail

/// Construct a library field from its serialized spec. Families:
///   constant(cx, cy)
///   rotation(amplitude)                      psi = a(-y, x)
///   dilation(amplitude)                      psi = a x
///   radial_bump(k, phase, r_center, width, amplitude, profile)
///                                            psi = eta(r) cos(k theta - phase) r_hat
///   axis_field(component, k, phase, r_center, width, amplitude, profile)
///                                            psi = eta(r) cos(k theta - phase) e_component
///   interior_bump(cx, cy, radius, amplitude, dir_x, dir_y)
///   combination: {"terms": [{"coef": c, "field": spec}, ...]}
/// An optional "support" string overrides the declared support class.
inline DisplacementField field_library(const json& spec) {
    DisplacementField f;
    f.spec = spec;
    const std::string family = spec.at("family").get<std::string>();

    if (family == "constant") {
        const double cx = spec.value("cx", 0.0), cy = spec.value("cy", 0.0);
        f.value = [cx, cy](const Vec2&) { return Vec2(cx, cy); };
        f.jacobian = [](const Vec2&) { return Mat2::Zero().eval(); };
    } else if (family == "rotation") {
        const double a = spec.value("amplitude", 1.0);
        f.value = [a](const Vec2& x) { return Vec2(-a * x.y(), a * x.x()); };
        f.jacobian = [a](const Vec2&) { return (Mat2() << 0.0, -a, a, 0.0).finished(); };
    } else if (family == "dilation") {
        const double a = spec.value("amplitude", 1.0);
        f.value = [a](const Vec2& x) { return (a * x).eval(); };
        f.jacobian = [a](const Vec2&) { return (a * Mat2::Identity()).eval(); };
    } else if (family == "radial_bump" || family == "axis_field") {
        detail::RadialProfile prof;
        prof.kind = detail::profile_kind(spec);
        prof.r_center = spec.value("r_center", 1.0);
        prof.width = spec.at("width").get<double>();
        prof.amplitude = spec.value("amplitude", 1.0);
        const double k = spec.value("k", 0.0);
        const double phase = spec.value("phase", 0.0);
        const bool axis = family == "axis_field";
        const int comp = spec.value("component", 0);
        if (axis && comp != 0 && comp != 1) throw ArgumentError("axis_field: component must be 0 or 1");
        if (!(prof.width > 0.0)) throw ArgumentError(family + ": width must be positive");
        auto polar = [prof, k, phase](const Vec2& x, double& eta, double& deta, double& g, double& gp,
                                      Vec2& rhat, Vec2& that) {
            const double r = x.norm();
            if (r < 1e-300) { eta = deta = g = gp = 0.0; rhat = Vec2(1, 0); that = Vec2(0, 1); return; }
            rhat = x / r;
            that = Vec2(-rhat.y(), rhat.x());
            const double th = std::atan2(x.y(), x.x());
            eta = prof.eta(r);
            deta = prof.deta(r);
            g = std::cos(k * th - phase);
            gp = -k * std::sin(k * th - phase);
        };
        if (!axis) {
            f.value = [polar](const Vec2& x) {
                double eta, deta, g, gp; Vec2 rh, th;
                polar(x, eta, deta, g, gp, rh, th);
                return (eta * g * rh).eval();
            };
            f.jacobian = [polar](const Vec2& x) {
                double eta, deta, g, gp; Vec2 rh, th;
                polar(x, eta, deta, g, gp, rh, th);
                const double r = x.norm();
                if (r < 1e-300) return Mat2::Zero().eval();
                Mat2 jac = deta * g * (rh * rh.transpose());
                jac += (eta / r) * (gp * (rh * th.transpose()) + g * (th * th.transpose()));
                return jac.eval();
            };
        } else {
            f.value = [polar, comp](const Vec2& x) {
                double eta, deta, g, gp; Vec2 rh, th;
                polar(x, eta, deta, g, gp, rh, th);
                Vec2 v = Vec2::Zero();
                v[comp] = eta * g;
                return v;
            };
            f.jacobian = [polar, comp](const Vec2& x) {
                double eta, deta, g, gp; Vec2 rh, th;
                polar(x, eta, deta, g, gp, rh, th);
                const double r = x.norm();
                Vec2 grad = deta * g * rh;
                if (r > 1e-300) grad += (eta / r) * gp * th;
                Mat2 jac = Mat2::Zero();
                jac.row(comp) = grad.transpose();
                return jac.eval();
            };
        }
    } else if (family == "interior_bump") {
        const double cx = spec.at("cx").get<double>(), cy = spec.at("cy").get<double>();
        const double rad = spec.at("radius").get<double>();
        const double amp = spec.value("amplitude", 1.0);
        Vec2 dir(spec.value("dir_x", 1.0), spec.value("dir_y", 0.0));
        if (!(rad > 0.0)) throw ArgumentError("interior_bump: radius must be positive");
        if (dir.norm() < 1e-300) throw ArgumentError("interior_bump: zero direction");
        dir.normalize();
        const Vec2 c(cx, cy);
        f.support = FieldSupport::Interior;
        f.value = [c, rad, amp, dir](const Vec2& x) {
            const double s = (x - c).norm() / rad;
            return (amp * profile::bump(s) * dir).eval();
        };
        f.jacobian = [c, rad, amp, dir](const Vec2& x) {
            const Vec2 d = x - c;
            const double dist = d.norm();
            if (dist < 1e-300) return Mat2::Zero().eval();
            const double s = dist / rad;
            const Vec2 grad = (amp * profile::bump_d(s) / rad) * (d / dist);
            return (dir * grad.transpose()).eval();
        };
    } else if (family == "combination") {
        std::vector<std::pair<double, DisplacementField>> terms;
        for (const auto& term : spec.at("terms"))
            terms.emplace_back(term.at("coef").get<double>(), field_library(term.at("field")));
        f.value = [terms](const Vec2& x) {
            Vec2 v = Vec2::Zero();
            for (const auto& [c, g] : terms) v += c * g.value(x);
            return v;
        };
        f.jacobian = [terms](const Vec2& x) {
            Mat2 jac = Mat2::Zero();
            for (const auto& [c, g] : terms) jac += c * g.jacobian(x);
            return jac.eval();
        };
        // union of supports: interior absorbs into either one-sided class,
        // any S/W mix or a global term makes the combination global
        auto join = [](FieldSupport u, FieldSupport v) {
            if (u == v) return u;
            if (u == FieldSupport::Interior) return v;
            if (v == FieldSupport::Interior) return u;
            return FieldSupport::Global;
        };
        if (!terms.empty()) {
            f.support = terms.front().second.support;
            for (const auto& [c, g] : terms) f.support = join(f.support, g.support);
        }
    } else {
        throw ArgumentError("field_library: unknown family '" + family + "'");
    }
    if (spec.contains("support")) f.support = field_support_from_string(spec["support"].get<std::string>());
    return f;
}

inline DisplacementField field_library(const std::string& family,
                                       const std::map<std::string, double>& params = {}) {
    json spec;
    spec["family"] = family;
    for (const auto& [k, v] : params) spec[k] = v;
    return field_library(spec);
}

/// alpha * a, as a reconstructible field.
inline DisplacementField scale_field(const DisplacementField& a, double alpha) {
    json spec;
    spec["family"] = "combination";
    spec["terms"] = json::array({json{{"coef", alpha}, {"field", a.spec}}});
    spec["support"] = to_string(a.support);
    return field_library(spec);
}

/// alpha * a + beta * b, as a reconstructible field.
inline DisplacementField combine_fields(const DisplacementField& a, double alpha,
                                        const DisplacementField& b, double beta) {
    json spec;
    spec["family"] = "combination";
    spec["terms"] = json::array({json{{"coef", alpha}, {"field", a.spec}},
                                 json{{"coef", beta}, {"field", b.spec}}});
    if (a.support == b.support) spec["support"] = to_string(a.support);
    return field_library(spec);
}

/// Uniform grid of n x n points covering the mesh bounding box.
inline std::vector<Vec2> bounding_box_grid(const Mesh& mesh, int n = 25) {
    if (mesh.vertices.empty() || n < 2) throw ArgumentError("bounding_box_grid: need a mesh and n >= 2");
    Vec2 lo = mesh.vertices[0], hi = mesh.vertices[0];
    for (const auto& v : mesh.vertices) {
        lo = lo.cwiseMin(v);
        hi = hi.cwiseMax(v);
    }
    std::vector<Vec2> pts;
    pts.reserve(std::size_t(n) * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            pts.emplace_back(lo.x() + (hi.x() - lo.x()) * i / (n - 1),
                             lo.y() + (hi.y() - lo.y()) * j / (n - 1));
    return pts;
}

/// Sampled estimate of |psi| + |grad psi| + |grad^2 psi| over the grid:
/// Euclidean norm for the value, entrywise max for the matrices, second
/// derivatives by central differences of the Jacobian with step 1e-5.
/// A lower bound of the true sup norm (it only sees the sample points).
inline double c2_norm_estimate(const DisplacementField& psi, const std::vector<Vec2>& grid) {
    if (grid.empty()) throw ArgumentError("c2_norm_estimate: empty sample grid");
    const double h = 1e-5;
    double worst = 0.0;
    for (const auto& x : grid) {
        const double v = psi.value(x).norm();
        const double j = psi.jacobian(x).cwiseAbs().maxCoeff();
        double hess = 0.0;
        for (int d = 0; d < 2; ++d) {
            Vec2 e = Vec2::Zero();
            e[d] = h;
            const Mat2 dj = (psi.jacobian(x + e) - psi.jacobian(x - e)) / (2.0 * h);
            hess = std::max(hess, dj.cwiseAbs().maxCoeff());
        }
        worst = std::max(worst, v + j + hess);
    }
    return worst;
}

/// Deformed mesh x -> x + t psi(x). Connectivity and tags are preserved.
/// Throws if any triangle loses positive orientation, naming the worst one.
inline Mesh deform(const Mesh& mesh, const DisplacementField& psi, double t) {
    Mesh out = mesh;
    for (auto& v : out.vertices) v = v + t * psi.value(v);
    double worst_area = std::numeric_limits<double>::max();
    int worst = -1;
    for (int k = 0; k < out.triangle_count(); ++k) {
        const double a = triangle_area(out, k);
        if (a < worst_area) {
            worst_area = a;
            worst = k;
        }
    }
    if (!(worst_area > 0.0))
        throw DeformationError("deform: triangle " + std::to_string(worst) +
                               " inverted (signed area " + std::to_string(worst_area) + ")");
    return out;
}

} // namespace steklov
