#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "steklov/coeff_derivative.hpp"
#include "steklov/errors.hpp"
#include "steklov/fields.hpp"
#include "steklov/forms.hpp"
#include "steklov/shape_derivative.hpp"
#include "steklov/spectrum.hpp"

namespace steklov {

enum class SupportRegion { S, W, Interior, Any };

inline const char* to_string(SupportRegion r) {
    switch (r) {
        case SupportRegion::S: return "S";
        case SupportRegion::W: return "W";
        case SupportRegion::Interior: return "interior";
        default: return "any";
    }
}

inline SupportRegion support_region_from_string(const std::string& s) {
    if (s == "S") return SupportRegion::S;
    if (s == "W") return SupportRegion::W;
    if (s == "interior") return SupportRegion::Interior;
    if (s == "any") return SupportRegion::Any;
    throw ArgumentError("unknown support region '" + s + "'");
}

namespace detail {

inline double distance_to_segments(const Vec2& x, const std::vector<std::pair<Vec2, Vec2>>& segs) {
    double best = std::numeric_limits<double>::max();
    for (const auto& [a, b] : segs) {
        const Vec2 d = b - a;
        const double u = std::clamp(d.dot(x - a) / d.squaredNorm(), 0.0, 1.0);
        best = std::min(best, (a + u * d - x).norm());
    }
    return best;
}

inline std::vector<std::pair<Vec2, Vec2>> region_segments(const Mesh& mesh, BoundaryTag tag) {
    std::vector<std::pair<Vec2, Vec2>> segs;
    for (const auto& be : mesh.boundary)
        if (be.tag == tag) segs.emplace_back(mesh.vertices[be.a], mesh.vertices[be.b]);
    return segs;
}

/// Radial ranges of the tagged boundary vertices about the origin; used to
/// recognize annulus-like meshes where radial windows separate S from W.
struct RadialLayout {
    double s_min = 0, s_max = 0, w_min = 0, w_max = 0;
    bool s_outside = false; // S radially outside W with a clear gap
    bool w_outside = false;
    bool separable() const { return s_outside || w_outside; }
};

inline RadialLayout radial_layout(const Mesh& mesh) {
    RadialLayout lay;
    lay.s_min = lay.w_min = std::numeric_limits<double>::max();
    for (const auto& be : mesh.boundary) {
        for (int v : {be.a, be.b}) {
            const double r = mesh.vertices[v].norm();
            if (be.tag == BoundaryTag::S) {
                lay.s_min = std::min(lay.s_min, r);
                lay.s_max = std::max(lay.s_max, r);
            } else {
                lay.w_min = std::min(lay.w_min, r);
                lay.w_max = std::max(lay.w_max, r);
            }
        }
    }
    const double scale = std::max(lay.s_max, lay.w_max);
    lay.s_outside = lay.s_min > lay.w_max + 0.02 * scale;
    lay.w_outside = lay.w_min > lay.s_max + 0.02 * scale;
    return lay;
}

inline DisplacementField normalized(DisplacementField f, const std::vector<Vec2>& grid) {
    const double norm = c2_norm_estimate(f, grid);
    if (!(norm > 0.0)) return f;
    return scale_field(f, 1.0 / norm);
}

} // namespace detail

/// Candidate perturbation fields localized to the requested region: low-order
/// angular harmonics in radial windows when the region is a radially separated
/// circle (both flat-profile bumps and ramps driving the normal derivative),
/// directional bumps seeded on the region's edges otherwise, and compactly
/// supported interior bumps for the interior region. All candidates are
/// normalized to unit C^2 estimate on the mesh bounding-box grid.
inline std::vector<DisplacementField> make_candidates(const Mesh& mesh, SupportRegion support,
                                                      int count) {
    if (count < 0) throw ArgumentError("make_candidates: count must be nonnegative");
    if (count == 0) return {};
    const auto grid = bounding_box_grid(mesh, 25);
    const auto lay = detail::radial_layout(mesh);
    std::vector<DisplacementField> out;

    auto add = [&](json spec, FieldSupport sup) {
        spec["support"] = to_string(sup);
        out.push_back(detail::normalized(field_library(spec), grid));
    };

    auto radial_family = [&](double target_lo, double target_hi, double excluded_radius,
                             bool excluded_inside, FieldSupport sup) {
        // window around the target circle, kept clear of the excluded circle
        const double rc = 0.5 * (target_lo + target_hi);
        double width;
        if (excluded_inside)
            width = 0.96 * (target_lo - excluded_radius) + 0.5 * (target_hi - target_lo);
        else
            width = 0.96 * (excluded_radius - target_hi) + 0.5 * (target_hi - target_lo);
        width = std::min(width, 0.96 * rc); // keep the window away from the origin
        for (int k = 0; out.size() < std::size_t(count); ++k) {
            add({{"family", "radial_bump"}, {"k", double(k)}, {"phase", 0.0},
                 {"r_center", rc}, {"width", width}},
                sup);
            if (out.size() >= std::size_t(count)) break;
            if (k > 0)
                add({{"family", "radial_bump"}, {"k", double(k)}, {"phase", M_PI / 2},
                     {"r_center", rc}, {"width", width}},
                    sup);
            if (out.size() >= std::size_t(count)) break;
            // ramp through the circle: nonzero normal derivative on the region
            add({{"family", "radial_bump"}, {"k", double(k)}, {"profile", "ramp"},
                 {"r_center", rc}, {"width", width}},
                sup);
            if (out.size() >= std::size_t(count)) break;
            add({{"family", "axis_field"}, {"component", double(k % 2)}, {"k", double(k)},
                 {"r_center", rc}, {"width", width}},
                sup);
        }
    };

    auto edge_bump_family = [&](BoundaryTag target, FieldSupport sup) {
        const auto other = detail::region_segments(
            mesh, target == BoundaryTag::S ? BoundaryTag::W : BoundaryTag::S);
        std::vector<int> edges;
        for (int e = 0; e < mesh.boundary_count(); ++e)
            if (mesh.boundary[e].tag == target) edges.push_back(e);
        if (edges.empty()) return;
        const int stride = std::max<std::size_t>(1, edges.size() / std::max(1, count / 2));
        for (std::size_t i = 0; i < edges.size() && out.size() < std::size_t(count); i += stride) {
            const auto& be = mesh.boundary[edges[i]];
            const Vec2 mid = 0.5 * (mesh.vertices[be.a] + mesh.vertices[be.b]);
            const double radius = 0.9 * detail::distance_to_segments(mid, other);
            if (!(radius > 0.0)) continue;
            for (int dir = 0; dir < 2 && out.size() < std::size_t(count); ++dir)
                add({{"family", "interior_bump"}, {"cx", mid.x()}, {"cy", mid.y()},
                     {"radius", radius}, {"dir_x", double(dir == 0)}, {"dir_y", double(dir == 1)}},
                    sup);
        }
    };

    switch (support) {
        case SupportRegion::S:
            if (lay.s_outside)
                radial_family(lay.s_min, lay.s_max, lay.w_max, true, FieldSupport::MeetsOnlyS);
            else if (lay.w_outside)
                radial_family(lay.s_min, lay.s_max, lay.w_min, false, FieldSupport::MeetsOnlyS);
            else
                edge_bump_family(BoundaryTag::S, FieldSupport::MeetsOnlyS);
            break;
        case SupportRegion::W:
            if (lay.w_outside)
                radial_family(lay.w_min, lay.w_max, lay.s_max, true, FieldSupport::MeetsOnlyW);
            else if (lay.s_outside)
                radial_family(lay.w_min, lay.w_max, lay.s_min, false, FieldSupport::MeetsOnlyW);
            else
                edge_bump_family(BoundaryTag::W, FieldSupport::MeetsOnlyW);
            break;
        case SupportRegion::Interior: {
            std::vector<std::pair<Vec2, Vec2>> all;
            for (const auto& be : mesh.boundary) all.emplace_back(mesh.vertices[be.a], mesh.vertices[be.b]);
            const int stride = std::max(1, mesh.triangle_count() / std::max(1, count));
            for (int t = 0; t < mesh.triangle_count() && out.size() < std::size_t(count); t += stride) {
                const auto& tri = mesh.triangles[t];
                const Vec2 c = (mesh.vertices[tri[0]] + mesh.vertices[tri[1]] + mesh.vertices[tri[2]]) / 3.0;
                const double radius = 0.9 * detail::distance_to_segments(c, all);
                if (!(radius > 1e-12)) continue;
                for (int dir = 0; dir < 2 && out.size() < std::size_t(count); ++dir)
                    add({{"family", "interior_bump"}, {"cx", c.x()}, {"cy", c.y()},
                         {"radius", radius}, {"dir_x", double(dir == 0)}, {"dir_y", double(dir == 1)}},
                        FieldSupport::Interior);
            }
            break;
        }
        case SupportRegion::Any: {
            const auto s_side = make_candidates(mesh, SupportRegion::S, (count + 1) / 2);
            const auto w_side = make_candidates(mesh, SupportRegion::W, count / 2);
            out = s_side;
            out.insert(out.end(), w_side.begin(), w_side.end());
            break;
        }
    }
    if (static_cast<int>(out.size()) > count) out.resize(count);
    return out;
}

/// Outcome of the splitting-perturbation search over a candidate set.
struct SplitSearch {
    bool found = false;
    DisplacementField psi;        // scaled so its C^2 estimate equals the budget
    PerturbationMatrix pm;        // for the scaled field
    double unit_deviation = 0.0;  // deviation of the winner at unit norm
    double threshold = 0.0;
};

struct SearchOptions {
    std::uint64_t seed = 12345;
    int combinations = 16;            // random 2-combinations tried on top of singles
    double deviation_rel_threshold = 1e-6;
    double deviation_abs_threshold = 1e-12;
};

/// Pick the candidate (or random 2-combination) with the largest no-splitting
/// deviation per unit C^2 norm, scaled to the budget. Deviations are linear in
/// the field, so combination matrices are combined without reassembly. A
/// below-threshold maximum is reported as not-found, never as an error.
inline SplitSearch best_splitting_perturbation(const ProblemSpec& spec, const Mesh& mesh,
                                               const EigenSolution& sol, const EigenGroup& group,
                                               const std::vector<DisplacementField>& candidates,
                                               double budget, const SearchOptions& opts = {}) {
    if (candidates.empty()) throw ArgumentError("best_splitting_perturbation: empty candidate list");
    if (!(budget > 0.0)) throw ArgumentError("best_splitting_perturbation: budget must be positive");
    if (group.multiplicity < 2)
        throw ArgumentError("best_splitting_perturbation: group must have multiplicity >= 2");

    const auto grid = bounding_box_grid(mesh, 25);
    std::vector<PerturbationMatrix> pms;
    pms.reserve(candidates.size());
    std::vector<double> norms;
    for (const auto& c : candidates) {
        pms.push_back(perturbation_matrix(spec, mesh, sol, group, c));
        norms.push_back(c2_norm_estimate(c, grid));
    }

    double best_score = -1.0;
    DisplacementField best_field;
    Eigen::MatrixXd best_m;
    double best_norm = 1.0;
    auto consider = [&](const DisplacementField& f, const Eigen::MatrixXd& m, double norm) {
        if (!(norm > 0.0)) return;
        const double score = nosplit_deviation(m) / norm;
        if (score > best_score) {
            best_score = score;
            best_field = f;
            best_m = m;
            best_norm = norm;
        }
    };
    for (std::size_t i = 0; i < candidates.size(); ++i) consider(candidates[i], pms[i].M, norms[i]);

    std::mt19937_64 rng(opts.seed);
    if (candidates.size() >= 2) {
        std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
        std::uniform_real_distribution<double> angle(0.0, M_PI);
        for (int c = 0; c < opts.combinations; ++c) {
            std::size_t i = pick(rng), j = pick(rng);
            if (i == j) continue;
            const double phi = angle(rng);
            const double ca = std::cos(phi), sa = std::sin(phi);
            const DisplacementField combo = combine_fields(candidates[i], ca, candidates[j], sa);
            const Eigen::MatrixXd m = ca * pms[i].M + sa * pms[j].M;
            consider(combo, m, c2_norm_estimate(combo, grid));
        }
    }

    SplitSearch result;
    const double mnorm = best_m.norm();
    result.threshold = opts.deviation_rel_threshold * mnorm + opts.deviation_abs_threshold;
    result.unit_deviation = best_score;
    if (nosplit_deviation(best_m) <= result.threshold) return result; // not found

    const double scale = budget / best_norm;
    result.found = true;
    result.psi = scale_field(best_field, scale);
    result.pm.M = scale * best_m;
    result.pm.lambda_bar = group.lambda_bar;
    result.pm.mu_bar = group.mu_bar;
    result.pm.members = group.members;
    result.pm.perturbation = result.psi.spec;
    result.pm.deviation = nosplit_deviation(result.pm.M);
    return result;
}

/// One recorded step of an iterated simplification run.
struct SimplifyStep {
    int index = 0;                 // ell, 1-based
    double budget = 0.0;           // eps / 2^ell
    double applied_norm = 0.0;     // step scale times the perturbation norm estimate
    double step_scale = 0.0;       // fraction of the budget actually applied
    json perturbation;             // chosen field or coefficient spec (at unit scale)
    double deviation = 0.0;        // unit-norm deviation of the winner
    double predicted_gap = 0.0;    // first-order gap at the applied step
    double achieved_gap = 0.0;     // observed gap after the re-solve
    std::vector<double> spectrum_before, spectrum_after;
    std::vector<int> mult_before, mult_after;
    bool ok = false;
    std::string note;
};

struct SimplifyTrace {
    std::vector<SimplifyStep> steps;
    std::string termination;       // converged | inconclusive | step_failed | max_iterations
    int window = 0;                // N tracked eigenvalues
    double budget_total = 0.0;     // eps
    double gap_tol = 0.0;
    double total_applied = 0.0;
    std::uint64_t seed = 0;
    std::string mode;              // shape | coefficient
    std::string support;           // for shape runs
    std::vector<double> final_spectrum;
};

struct SimplifyOptions {
    SupportRegion support = SupportRegion::S;
    int candidate_count = 12;
    int max_steps = 10;
    std::uint64_t seed = 12345;
    double cluster_tol_floor = 1e-9; // never cluster coarser than the gap tolerance
};

namespace detail {

inline std::vector<int> multiplicity_profile(const EigenSolution& sol, int window, double tol) {
    EigenSolution head = sol;
    if (sol.count() > window) {
        head.lambda = sol.lambda.head(window);
        head.mu = sol.mu.head(window);
        head.X = sol.X.leftCols(window);
    }
    std::vector<int> profile;
    for (const auto& g : cluster_eigen(head, tol)) profile.push_back(g.multiplicity);
    return profile;
}

inline double min_rel_gap(const Eigen::VectorXd& lambda) {
    double best = std::numeric_limits<double>::max();
    for (int i = 1; i < lambda.size(); ++i) {
        const double scale = std::max(std::abs(lambda(i)), std::abs(lambda(i - 1)));
        best = std::min(best, (lambda(i) - lambda(i - 1)) / std::max(scale, 1e-300));
    }
    return best;
}

} // namespace detail

/// Result of one splitting step: the perturbed problem (new mesh for shape
/// steps, new coefficients for coefficient steps) plus the recorded step.
struct SplitStepResult {
    bool ok = false;
    Mesh mesh;
    ProblemSpec spec;
    EigenSolution solution;
    SimplifyStep step;
};

/// Apply the best splitting perturbation to one degenerate group within the
/// budget. The step size starts at the full budget and backtracks (t, t/2,
/// t/4) until the group's multiplicity profile improves; each trial re-solves
/// the perturbed problem.
inline SplitStepResult split_step(const ProblemSpec& spec, const Mesh& mesh, const EigenGroup& group,
                                  double budget, double gap_tol, const SimplifyOptions& opts) {
    if (!(budget > 0.0)) throw ArgumentError("split_step: budget must be positive");
    SplitStepResult result;
    result.mesh = mesh;
    result.spec = spec;
    result.step.budget = budget;

    const int kneed = group.members.empty() ? 1 : group.members.back() + 1;
    const EigenSolution base = solve_eigen(assemble_problem(mesh, spec), kneed);
    result.step.spectrum_before.assign(base.lambda.data(), base.lambda.data() + base.lambda.size());

    if (group.multiplicity < 2) {
        result.step.note = "group already simple; nothing to split";
        result.solution = base;
        return result;
    }

    const auto candidates = make_candidates(mesh, opts.support, opts.candidate_count);
    SearchOptions sopts;
    sopts.seed = opts.seed;
    const SplitSearch search =
        best_splitting_perturbation(spec, mesh, base, group, candidates, budget, sopts);
    result.step.deviation = search.unit_deviation;
    if (!search.found) {
        result.step.note = "no-split-found: best deviation below threshold";
        result.solution = base;
        return result;
    }
    result.step.perturbation = search.psi.spec;

    const auto slopes = predict_splitting(search.pm);
    const double spread = slopes.back() - slopes.front();
    const int window_begin = group.members.front();
    const int base_mult = group.multiplicity;

    for (double t : {1.0, 0.5, 0.25}) {
        Mesh moved;
        try {
            moved = deform(mesh, search.psi, t);
        } catch (const DeformationError&) {
            continue; // backtrack
        }
        EigenSolution sol = solve_eigen(assemble_problem(moved, spec), kneed);
        const auto profile = detail::multiplicity_profile(sol, kneed, gap_tol);
        // multiplicity of the cluster now covering the group's window
        int covered = 0, new_mult = 0;
        for (int m : profile) {
            if (covered + m > window_begin && covered < window_begin + base_mult)
                new_mult = std::max(new_mult, m);
            covered += m;
        }
        if (new_mult < base_mult) {
            result.ok = true;
            result.mesh = moved;
            result.solution = sol;
            result.step.ok = true;
            result.step.step_scale = t;
            result.step.applied_norm = t * budget;
            result.step.predicted_gap = t * spread;
            double gap = std::numeric_limits<double>::max();
            for (int i = window_begin + 1; i < window_begin + base_mult; ++i)
                gap = std::min(gap, sol.lambda(i) - sol.lambda(i - 1));
            result.step.achieved_gap = gap;
            result.step.spectrum_after.assign(sol.lambda.data(), sol.lambda.data() + sol.lambda.size());
            result.step.note = "split applied";
            return result;
        }
        result.step.note = "multiplicity did not decrease at t = " + std::to_string(t);
    }
    result.solution = base;
    if (result.step.note.empty()) result.step.note = "no admissible step size";
    return result;
}

namespace detail {

/// Shared driver of the iterated simplification: repeatedly cluster the first
/// N eigenvalues, target the lowest multiple group, and apply one splitting
/// step with the geometric budget eps / 2^ell.
template <class StepFn>
SimplifyTrace simplify_loop(const ProblemSpec& spec0, int window, double eps, double gap_tol,
                            const SimplifyOptions& opts, const std::string& mode,
                            std::function<EigenSolution(const ProblemSpec&)> solve,
                            StepFn&& do_step) {
    if (window < 1) throw ArgumentError("simplify: N must be >= 1");
    if (!(eps >= 0.0)) throw ArgumentError("simplify: budget must be nonnegative");
    if (!(gap_tol > 0.0)) throw ArgumentError("simplify: gap_tol must be positive");

    SimplifyTrace trace;
    trace.window = window;
    trace.budget_total = eps;
    trace.gap_tol = gap_tol;
    trace.seed = opts.seed;
    trace.mode = mode;
    trace.support = to_string(opts.support);

    ProblemSpec spec = spec0;
    for (int ell = 1; ell <= opts.max_steps + 1; ++ell) {
        EigenSolution sol = solve(spec);
        const auto profile = multiplicity_profile(sol, window, gap_tol);
        trace.final_spectrum.assign(sol.lambda.data(), sol.lambda.data() + std::min<int>(window, sol.count()));
        const bool all_simple = std::all_of(profile.begin(), profile.end(), [](int m) { return m == 1; });
        if (all_simple) {
            trace.termination = "converged";
            return trace;
        }
        if (ell > opts.max_steps) {
            trace.termination = "max_iterations";
            return trace;
        }
        const double budget = eps / std::pow(2.0, ell);
        if (!(budget > 0.0)) {
            trace.termination = "inconclusive";
            return trace;
        }
        // lowest multiple group among the tracked window
        EigenSolution head = sol;
        if (sol.count() > window) {
            head.lambda = sol.lambda.head(window);
            head.mu = sol.mu.head(window);
            head.X = sol.X.leftCols(window);
        }
        EigenGroup target;
        for (const auto& g : cluster_eigen(head, gap_tol))
            if (g.multiplicity > 1) { target = g; break; }

        SplitStepResult step = do_step(spec, target, budget, ell);
        step.step.index = ell;
        step.step.mult_before = profile;
        if (step.ok) step.step.mult_after = multiplicity_profile(step.solution, window, gap_tol);
        trace.steps.push_back(step.step);
        if (!step.ok) {
            trace.termination = trace.steps.back().note.rfind("no-split-found", 0) == 0 ? "inconclusive"
                                                                                        : "step_failed";
            return trace;
        }
        trace.total_applied += step.step.applied_norm;
        spec = step.spec;
    }
    trace.termination = "max_iterations";
    return trace;
}

} // namespace detail

struct SimplifyResult {
    SimplifyTrace trace;
    Mesh final_mesh;
    ProblemSpec final_spec;
};

/// Iterated shape simplification: split every multiple group among the first
/// N eigenvalues by composing deformations, with step budgets eps / 2^ell.
inline SimplifyResult greedy_simplify(const ProblemSpec& spec, const Mesh& mesh, int window,
                                      double eps, double gap_tol, const SimplifyOptions& opts = {}) {
    SimplifyResult result;
    result.final_mesh = mesh;
    result.final_spec = spec;
    auto solve = [&](const ProblemSpec& s) {
        return solve_eigen(assemble_problem(result.final_mesh, s), window);
    };
    auto step = [&](const ProblemSpec& s, const EigenGroup& group, double budget, int ell) {
        SimplifyOptions sopts = opts;
        sopts.seed = opts.seed + std::uint64_t(ell);
        SplitStepResult r = split_step(s, result.final_mesh, group, budget, gap_tol, sopts);
        if (r.ok) result.final_mesh = r.mesh;
        return r;
    };
    result.trace =
        detail::simplify_loop(spec, window, eps, gap_tol, opts, "shape", solve, step);
    return result;
}

/// Candidate coefficient perturbations: angular harmonics (plus matrix
/// structures for the anisotropic kind), normalized to unit sup norm.
inline std::vector<CoefficientPerturbation> make_coeff_candidates(const Mesh& mesh, CoeffKind kind,
                                                                  int count) {
    std::vector<CoefficientPerturbation> out;
    const auto grid = bounding_box_grid(mesh, 15);
    const char* kind_name = to_string(kind);
    if (kind == CoeffKind::MatrixCoefficient) {
        const char* structures[3] = {"iso", "diag", "offdiag"};
        for (int k = 0; static_cast<int>(out.size()) < count; ++k)
            for (int s = 0; s < 3 && static_cast<int>(out.size()) < count; ++s)
                out.push_back(make_coeff_perturbation(
                    json{{"kind", kind_name}, {"family", "matrix_harmonic"}, {"k", double(k)},
                         {"structure", structures[s]}},
                    grid));
    } else {
        for (int k = 1; static_cast<int>(out.size()) < count; ++k) {
            out.push_back(make_coeff_perturbation(
                json{{"kind", kind_name}, {"family", "angular_harmonic"}, {"k", double(k)}}, grid));
            if (static_cast<int>(out.size()) < count)
                out.push_back(make_coeff_perturbation(
                    json{{"kind", kind_name}, {"family", "angular_harmonic"}, {"k", double(k)},
                         {"phase", M_PI / 2}},
                    grid));
        }
    }
    return out;
}

/// Iterated coefficient simplification: as greedy_simplify, with perturbations
/// accumulated additively into the potential (or the matrix coefficient).
inline SimplifyResult coeff_simplify(const ProblemSpec& spec, const Mesh& mesh, int window,
                                     double eps, double gap_tol, CoeffKind kind,
                                     const SimplifyOptions& opts = {}) {
    SimplifyResult result;
    result.final_mesh = mesh;
    result.final_spec = spec;
    const auto candidates = make_coeff_candidates(mesh, kind, opts.candidate_count);
    if (candidates.empty()) throw ArgumentError("coeff_simplify: no candidates");

    auto solve = [&](const ProblemSpec& s) { return solve_eigen(assemble_problem(mesh, s), window); };
    auto step = [&](const ProblemSpec& s, const EigenGroup& group, double budget,
                    int ell) -> SplitStepResult {
        SplitStepResult r;
        r.mesh = mesh;
        r.spec = s;
        r.step.budget = budget;
        const int kneed = group.members.empty() ? window : group.members.back() + 1;
        const EigenSolution base = solve_eigen(assemble_problem(mesh, s), kneed);
        r.step.spectrum_before.assign(base.lambda.data(), base.lambda.data() + base.lambda.size());

        // score all candidates by deviation per unit sup norm
        double best_score = -1.0;
        int best = -1;
        Eigen::MatrixXd best_m;
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            const auto pm = coeff_perturbation_matrix(mesh, base, group, candidates[i], s);
            const double score = pm.deviation / std::max(candidates[i].sup_norm_estimate, 1e-300);
            if (score > best_score) {
                best_score = score;
                best = static_cast<int>(i);
                best_m = pm.M;
            }
        }
        r.step.deviation = best_score;
        const double threshold = 1e-6 * best_m.norm() + 1e-12;
        if (best < 0 || nosplit_deviation(best_m) <= threshold) {
            r.step.note = "no-split-found: best deviation below threshold";
            r.solution = base;
            return r;
        }
        const CoefficientPerturbation scaled = scale_coeff_perturbation(
            candidates[best], budget / std::max(candidates[best].sup_norm_estimate, 1e-300));
        r.step.perturbation = scaled.spec;
        PerturbationMatrix pm;
        pm.M = (budget / std::max(candidates[best].sup_norm_estimate, 1e-300)) * best_m;
        pm.lambda_bar = group.lambda_bar;
        const auto slopes = predict_splitting(pm);

        const int window_begin = group.members.front();
        const int base_mult = group.multiplicity;
        for (double t : {1.0, 0.5, 0.25}) {
            ProblemSpec trial;
            EigenSolution sol;
            try {
                trial = perturbed_spec(s, scaled, t, mesh);
                sol = solve_eigen(assemble_problem(mesh, trial), kneed);
            } catch (const CoercivityError&) {
                r.step.note = "coercivity lost at t = " + std::to_string(t);
                continue;
            }
            const auto profile = detail::multiplicity_profile(sol, kneed, gap_tol);
            int covered = 0, new_mult = 0;
            for (int m : profile) {
                if (covered + m > window_begin && covered < window_begin + base_mult)
                    new_mult = std::max(new_mult, m);
                covered += m;
            }
            if (new_mult < base_mult) {
                r.ok = true;
                r.spec = trial;
                r.solution = sol;
                r.step.ok = true;
                r.step.step_scale = t;
                r.step.applied_norm = t * budget;
                r.step.predicted_gap = t * (slopes.back() - slopes.front());
                double gap = std::numeric_limits<double>::max();
                for (int i = window_begin + 1; i < window_begin + base_mult; ++i)
                    gap = std::min(gap, sol.lambda(i) - sol.lambda(i - 1));
                r.step.achieved_gap = gap;
                r.step.spectrum_after.assign(sol.lambda.data(), sol.lambda.data() + sol.lambda.size());
                r.step.note = "split applied";
                result.final_spec = trial;
                return r;
            }
            r.step.note = "multiplicity did not decrease at t = " + std::to_string(t);
        }
        r.solution = base;
        return r;
    };
    result.trace = detail::simplify_loop(spec, window, eps, gap_tol, opts,
                                         "coefficient", solve, step);
    return result;
}

} // namespace steklov
