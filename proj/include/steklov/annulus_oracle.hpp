#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "steklov/errors.hpp"

// Independent analytic eigenvalues for the annulus with the spectral boundary
// condition on the outer circle and the Robin/Neumann condition on the inner
// one, by separation of variables. Deliberately mesh-free and standalone: this
// header must not include the assembly or solver headers, so oracle values
// cannot leak implementation details of the code they validate.

namespace steklov::oracle {

/// One separated mode u = f(r) trig(k theta).
struct AnnulusMode {
    int k = 0;                    // angular index
    double lambda = 0.0;
    int multiplicity = 1;         // 1 for k = 0, 2 for k >= 1
    bool harmonic_type = true;    // true: -Laplace u = 0; false: -Laplace u + u = 0
    bool degenerate_profile = false; // flagged when u(r1) ~ 0 makes lambda unreliable

    // radial profile: closed form (harmonic) or dense samples (Helmholtz)
    double alpha = 0.0, beta = 0.0;
    double r0 = 0.0, r1 = 0.0;
    std::vector<double> sample_r, sample_u, sample_up;

    double f(double r) const {
        if (harmonic_type) {
            if (k == 0) return alpha + beta * std::log(r);
            return alpha * std::pow(r, k) + beta * std::pow(r, -k);
        }
        return interp(sample_u, r);
    }
    double fp(double r) const {
        if (harmonic_type) {
            if (k == 0) return beta / r;
            return alpha * k * std::pow(r, k - 1) - beta * k * std::pow(r, -k - 1);
        }
        return interp(sample_up, r);
    }

private:
    double interp(const std::vector<double>& values, double r) const {
        const int n = static_cast<int>(sample_r.size());
        if (n < 2) throw OracleError("annulus mode has no sampled profile");
        const double h = (r1 - r0) / (n - 1);
        const double pos = std::clamp((r - r0) / h, 0.0, double(n - 1));
        const int i = std::min(int(pos), n - 2);
        const double w = pos - i;
        return (1.0 - w) * values[i] + w * values[i + 1];
    }
};

/// Modes of the harmonic problem: -Laplace u = 0 in the annulus,
/// u'(r1) + u(r1) = lambda u(r1) on the outer circle (so lambda = 1 + u'/u),
/// -u'(r0) + u(r0) = 0 on the inner circle. Closed form, no root finding.
inline std::vector<AnnulusMode> annulus_modes_p1(double r0, double r1, int k_max) {
    if (!(r0 > 0.0) || !(r0 < r1)) throw ArgumentError("annulus_modes_p1: need 0 < r0 < r1");
    if (k_max < 0) throw ArgumentError("annulus_modes_p1: k_max must be >= 0");
    std::vector<AnnulusMode> modes;
    for (int k = 0; k <= k_max; ++k) {
        AnnulusMode mode;
        mode.k = k;
        mode.harmonic_type = true;
        mode.multiplicity = k == 0 ? 1 : 2;
        mode.r0 = r0;
        mode.r1 = r1;
        if (k == 0) {
            // u = alpha + beta log r; inner condition fixes alpha/beta
            mode.beta = 1.0;
            mode.alpha = 1.0 / r0 - std::log(r0);
        } else {
            // u = alpha r^k + beta r^-k; inner condition fixes beta/alpha
            const double num = std::pow(r0, k) - k * std::pow(r0, k - 1);
            const double den = std::pow(r0, -k) + k * std::pow(r0, -k - 1);
            mode.alpha = 1.0;
            mode.beta = -num / den;
        }
        const double u1 = mode.f(r1);
        const double scale = std::max(std::abs(mode.f(r0)), std::abs(u1));
        if (std::abs(u1) < 1e-12 * scale) {
            mode.degenerate_profile = true;
            mode.lambda = std::numeric_limits<double>::quiet_NaN();
        } else {
            mode.lambda = 1.0 + mode.fp(r1) / u1;
        }
        modes.push_back(std::move(mode));
    }
    return modes;
}

/// Modes of the Helmholtz-type problem: -Laplace u + u = 0 in the annulus,
/// u'(r1) = lambda u(r1), u'(r0) = 0. The radial equation
/// u'' + u'/r - (1 + k^2/r^2) u = 0 is integrated by classical RK4 with
/// step-halving control (tolerance 1e-10 relative on lambda).
inline std::vector<AnnulusMode> annulus_modes_p2(double r0, double r1, int k_max,
                                                 int base_steps = 2000) {
    if (!(r0 > 0.0) || !(r0 < r1)) throw ArgumentError("annulus_modes_p2: need 0 < r0 < r1");
    if (k_max < 0) throw ArgumentError("annulus_modes_p2: k_max must be >= 0");

    auto integrate = [&](int k, int n, AnnulusMode* keep) {
        const double h = (r1 - r0) / n;
        double r = r0, u = 1.0, v = 0.0; // v = u'
        auto fu = [](double, double, double vv) { return vv; };
        auto fv = [k](double rr, double uu, double vv) { return -vv / rr + (1.0 + double(k) * k / (rr * rr)) * uu; };
        if (keep) {
            keep->sample_r.assign(1, r);
            keep->sample_u.assign(1, u);
            keep->sample_up.assign(1, v);
        }
        for (int i = 0; i < n; ++i) {
            const double k1u = fu(r, u, v), k1v = fv(r, u, v);
            const double k2u = fu(r + h / 2, u + h / 2 * k1u, v + h / 2 * k1v),
                         k2v = fv(r + h / 2, u + h / 2 * k1u, v + h / 2 * k1v);
            const double k3u = fu(r + h / 2, u + h / 2 * k2u, v + h / 2 * k2v),
                         k3v = fv(r + h / 2, u + h / 2 * k2u, v + h / 2 * k2v);
            const double k4u = fu(r + h, u + h * k3u, v + h * k3v),
                         k4v = fv(r + h, u + h * k3u, v + h * k3v);
            u += h / 6 * (k1u + 2 * k2u + 2 * k3u + k4u);
            v += h / 6 * (k1v + 2 * k2v + 2 * k3v + k4v);
            r = r0 + (i + 1) * h;
            if (keep) {
                keep->sample_r.push_back(r);
                keep->sample_u.push_back(u);
                keep->sample_up.push_back(v);
            }
        }
        if (std::abs(u) < 1e-300) throw OracleError("annulus_modes_p2: u(r1) vanished");
        return v / u;
    };

    std::vector<AnnulusMode> modes;
    for (int k = 0; k <= k_max; ++k) {
        AnnulusMode mode;
        mode.k = k;
        mode.harmonic_type = false;
        mode.multiplicity = k == 0 ? 1 : 2;
        mode.r0 = r0;
        mode.r1 = r1;
        const double coarse = integrate(k, base_steps, nullptr);
        const double fine = integrate(k, 2 * base_steps, &mode);
        if (std::abs(fine - coarse) > 1e-10 * std::max(1.0, std::abs(fine)))
            throw OracleError("annulus_modes_p2: integrator tolerance not met for k = " + std::to_string(k));
        mode.lambda = fine;
        modes.push_back(std::move(mode));
    }
    return modes;
}

/// Boundary condition residuals of a mode by direct substitution,
/// normalized by the profile scale. Used by the oracle's self-check.
inline double boundary_residual(const AnnulusMode& mode) {
    const double scale = std::max({std::abs(mode.f(mode.r0)), std::abs(mode.f(mode.r1)), 1e-300});
    double inner, outer;
    if (mode.harmonic_type) {
        inner = -mode.fp(mode.r0) + mode.f(mode.r0);
        outer = mode.fp(mode.r1) + mode.f(mode.r1) - mode.lambda * mode.f(mode.r1);
    } else {
        inner = mode.fp(mode.r0);
        outer = mode.fp(mode.r1) - mode.lambda * mode.f(mode.r1);
    }
    return std::max(std::abs(inner), std::abs(outer)) / scale;
}

/// The full spectrum expanded with multiplicities, ascending.
inline std::vector<double> expand_spectrum(const std::vector<AnnulusMode>& modes, int count) {
    std::vector<double> all;
    for (const auto& mode : modes) {
        if (mode.degenerate_profile) continue;
        for (int m = 0; m < mode.multiplicity; ++m) all.push_back(mode.lambda);
    }
    std::sort(all.begin(), all.end());
    if (count >= 0 && count < static_cast<int>(all.size())) all.resize(count);
    return all;
}

/// Closed-form angular selection factors for a degenerate pair of angular
/// index k under a cos(k_p theta) perturbation: the cos^2 / sin^2 projections
/// of cos(k_p theta) are +-pi/2 when k_p = 2k and zero otherwise. The radial
/// part of the prediction is left to a 1D quadrature supplied by the caller.
struct SplittingFactors {
    bool applicable = false;
    double factor_cos = 0.0; // integral of cos(k_p t) cos^2(k t) over [0, 2 pi)
    double factor_sin = 0.0; // integral of cos(k_p t) sin^2(k t)
};

inline SplittingFactors annulus_splitting_factors(const AnnulusMode& mode, int k_p) {
    SplittingFactors out;
    if (mode.k < 1) return out; // simple mode: nothing to split
    out.applicable = true;
    if (k_p == 2 * mode.k) {
        out.factor_cos = M_PI / 2.0;
        out.factor_sin = -M_PI / 2.0;
    }
    return out;
}

} // namespace steklov::oracle
