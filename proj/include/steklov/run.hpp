#pragma once

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "steklov/annulus_oracle.hpp"
#include "steklov/coeff_derivative.hpp"
#include "steklov/errors.hpp"
#include "steklov/fields.hpp"
#include "steklov/forms.hpp"
#include "steklov/geometry.hpp"
#include "steklov/io.hpp"
#include "steklov/search.hpp"
#include "steklov/shape_derivative.hpp"
#include "steklov/spectrum.hpp"

namespace steklov {

namespace fs = std::filesystem;

inline constexpr const char* kArtifactVersion = "0.1.0";
inline constexpr const char* kOutputRootEnv = "STEKLOV_LAB_OUT";

// exit codes of every subcommand
inline constexpr int kExitOk = 0;            // success / converged
inline constexpr int kExitInconclusive = 1;  // e.g. no-split-found
inline constexpr int kExitConfig = 2;        // usage or config error
inline constexpr int kExitNumerical = 3;     // numerical failure

// ---------------------------------------------------------------------------
// Coefficient fields from config specs.
// ---------------------------------------------------------------------------

/// Scalar coefficient: {"family":"constant","c":..} or
/// {"family":"angular_harmonic","k":..,"amplitude":..,"phase":..,"offset":..}.
inline ScalarField scalar_field_from_json(const json& spec) {
    const std::string family = spec.at("family").get<std::string>();
    if (family == "constant") {
        const double c = spec.value("c", 1.0);
        return [c](const Vec2&) { return c; };
    }
    if (family == "angular_harmonic") {
        const double k = spec.at("k").get<double>();
        const double amp = spec.value("amplitude", 1.0);
        const double phase = spec.value("phase", 0.0);
        const double offset = spec.value("offset", 0.0);
        return [k, amp, phase, offset](const Vec2& x) {
            return offset + amp * std::cos(k * std::atan2(x.y(), x.x()) - phase);
        };
    }
    throw ConfigError("unknown scalar coefficient family '" + family + "'");
}

/// Matrix coefficient: {"family":"identity","scale":..}, {"family":"diag",..}
/// or {"family":"identity_plus_harmonic","k":..,"amplitude":..,"structure":..}.
inline MatrixField matrix_field_from_json(const json& spec) {
    const std::string family = spec.at("family").get<std::string>();
    if (family == "identity") {
        const double s = spec.value("scale", 1.0);
        return [s](const Vec2&) { return (s * Mat2::Identity()).eval(); };
    }
    if (family == "diag") {
        const double a11 = spec.value("a11", 1.0), a22 = spec.value("a22", 1.0);
        return [a11, a22](const Vec2&) { return (Mat2() << a11, 0, 0, a22).finished(); };
    }
    if (family == "identity_plus_harmonic") {
        const auto pert = make_coeff_perturbation(
            json{{"kind", "matrix_coefficient"},
                 {"family", "matrix_harmonic"},
                 {"k", spec.at("k").get<double>()},
                 {"phase", spec.value("phase", 0.0)},
                 {"amplitude", spec.value("amplitude", 0.0)},
                 {"structure", spec.value("structure", "iso")}});
        auto B = pert.B;
        return [B](const Vec2& x) { return (Mat2::Identity() + B(x)).eval(); };
    }
    throw ConfigError("unknown matrix coefficient family '" + family + "'");
}

// ---------------------------------------------------------------------------
// Run configuration.
// ---------------------------------------------------------------------------

struct RunConfig {
    json raw;                       // canonical copy (with overrides applied)
    Mesh mesh;
    ProblemSpec problem;
    int k = 8;                      // how many eigenpairs the solve carries
    double cluster_tol = 1e-9;
    std::string experiment;         // solve | deriv-check | split | simplify | coeff | oracle-compare | w-scan
    json experiment_params;
    std::uint64_t seed = 12345;
    fs::path out_dir;
};

inline Mesh mesh_from_config(const json& domain) {
    const std::string family = domain.at("family").get<std::string>();
    if (family == "annulus")
        return build_annulus(domain.at("r_inner").get<double>(), domain.at("r_outer").get<double>(),
                             domain.at("n_radial").get<int>(), domain.at("n_angular").get<int>());
    if (family == "rectangle") {
        const double w = domain.at("width").get<double>(), h = domain.at("height").get<double>();
        const std::string rule = domain.value("tag_rule", "top_s");
        return build_rectangle(w, h, domain.at("nx").get<int>(), domain.at("ny").get<int>(),
                               rectangle_tag_rule(rule, w, h), rule);
    }
    if (family == "file") return mesh_from_json(json::parse(read_text_file(domain.at("path").get<std::string>())));
    throw ConfigError("unknown domain family '" + family + "'");
}

inline ProblemSpec problem_from_config(const json& problem) {
    ProblemSpec spec;
    spec.variant = variant_from_string(problem.value("variant", "P1"));
    if (problem.contains("a")) spec.a = scalar_field_from_json(problem["a"]);
    if (problem.contains("A")) spec.A = matrix_field_from_json(problem["A"]);
    if (spec.has_potential() && !spec.a)
        throw ConfigError(std::string("variant ") + to_string(spec.variant) + " needs a potential \"a\"");
    if (spec.has_matrix_coefficient() && !spec.A)
        throw ConfigError(std::string("variant ") + to_string(spec.variant) + " needs a coefficient \"A\"");
    spec.volume_quad_degree = problem.value("quad_degree", 2);
    spec.edge_quad_points = problem.value("edge_points", 2);
    return spec;
}

/// Parse a config document, apply scalar overrides, and resolve the output
/// directory (relative paths go under $STEKLOV_LAB_OUT when set).
inline RunConfig parse_run_config(json doc, const std::string& experiment_override = "",
                                  std::int64_t seed_override = -1,
                                  const std::string& out_override = "") {
    RunConfig config;
    if (!doc.contains("experiment") || !doc["experiment"].is_object())
        doc["experiment"] = json::object();
    if (!experiment_override.empty()) {
        if (doc["experiment"].contains("type") &&
            doc["experiment"]["type"].get<std::string>() != experiment_override)
            throw ConfigError("config experiment type '" +
                              doc["experiment"]["type"].get<std::string>() +
                              "' does not match subcommand '" + experiment_override + "'");
        doc["experiment"]["type"] = experiment_override;
    }
    if (seed_override >= 0) doc["seed"] = seed_override;
    if (!out_override.empty()) doc["out"] = out_override;

    if (!doc.contains("domain")) throw ConfigError("config needs a \"domain\" block");
    config.mesh = mesh_from_config(doc["domain"]);
    config.problem = problem_from_config(doc.value("problem", json{{"variant", "P1"}}));
    const json solver = doc.value("solver", json::object());
    config.k = solver.value("k", 8);
    config.cluster_tol = solver.value("cluster_tol", 1e-9);
    if (config.k < 0) throw ConfigError("solver.k must be nonnegative");
    if (!(config.cluster_tol > 0)) throw ConfigError("solver.cluster_tol must be positive");
    config.experiment = doc["experiment"].value("type", "solve");
    config.experiment_params = doc["experiment"];
    config.seed = doc.value("seed", std::uint64_t(12345));

    std::string out = doc.value("out", "");
    if (out.empty()) out = "steklov-runs/" + config.experiment;
    fs::path out_path(out);
    if (out_path.is_relative()) {
        if (const char* root = std::getenv(kOutputRootEnv)) out_path = fs::path(root) / out_path;
    }
    config.out_dir = out_path;
    config.raw = doc;
    return config;
}

// ---------------------------------------------------------------------------
// Manifest.
// ---------------------------------------------------------------------------

inline std::string fnv1a_hex(const std::string& data) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    std::ostringstream out;
    out << std::hex << std::setw(16) << std::setfill('0') << h;
    return out.str();
}

inline std::string iso_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

/// Collects produced files and summary metrics while an experiment runs, then
/// lands as manifest.json next to them.
class RunManifest {
public:
    RunManifest(const RunConfig& config) : config_(config) {
        doc_["version"] = kArtifactVersion;
        doc_["created"] = iso_timestamp();
        doc_["config"] = config.raw;
        doc_["input_hash"] = fnv1a_hex(config.raw.dump());
        doc_["files"] = json::array();
        doc_["metrics"] = json::object();
        fs::create_directories(config.out_dir);
        const fs::path lock = config.out_dir / ".lock";
        if (fs::exists(lock))
            throw ConfigError("output directory '" + config.out_dir.string() +
                              "' is locked by another run (remove .lock if stale)");
        write_text_file(lock.string(), "pid\n");
    }
    ~RunManifest() {
        std::error_code ec;
        fs::remove(config_.out_dir / ".lock", ec);
    }

    void write_file(const std::string& name, const std::string& content) {
        write_text_file((config_.out_dir / name).string(), content);
        doc_["files"].push_back(name);
    }
    void metric(const std::string& key, const json& value) { doc_["metrics"][key] = value; }
    void finalize() { write_text_file((config_.out_dir / "manifest.json").string(), doc_.dump(2)); }
    const json& doc() const { return doc_; }

private:
    RunConfig config_;
    json doc_;
};

// ---------------------------------------------------------------------------
// Experiment drivers. Each returns a process exit code.
// ---------------------------------------------------------------------------

inline EigenGroup pick_group(const std::vector<EigenGroup>& groups, const json& params) {
    if (params.contains("group")) {
        const int g = params["group"].get<int>();
        if (g < 0 || g >= static_cast<int>(groups.size()))
            throw ConfigError("experiment.group out of range");
        return groups[g];
    }
    for (const auto& g : groups)
        if (g.multiplicity > 1) return g;
    throw ConfigError("no multiple group found; pass experiment.group explicitly");
}

inline int cmd_solve(const RunConfig& config) {
    RunManifest manifest(config);
    const auto pair = assemble_problem(config.mesh, config.problem);
    const auto sol = solve_eigen(pair, config.k);
    const auto groups = cluster_eigen(sol, config.cluster_tol);
    manifest.write_file("spectrum.csv", spectrum_table_csv(sol, groups));
    manifest.metric("k", sol.count());
    manifest.metric("discarded", sol.discarded);
    if (sol.count() > 0) manifest.metric("lambda_min", sol.lambda(0));
    const int trials = config.experiment_params.value("minmax_trials", 0);
    if (trials > 0) {
        const auto report = minmax_check(pair, sol, trials, config.seed);
        std::ostringstream out;
        out << std::setprecision(17) << "level,mu,max_rayleigh,violations\n";
        for (const auto& lvl : report.levels)
            out << lvl.index << "," << lvl.mu << "," << lvl.max_rayleigh << "," << lvl.violations << "\n";
        manifest.write_file("minmax.csv", out.str());
        manifest.metric("minmax_passed", report.passed);
        if (!report.passed) {
            manifest.finalize();
            return kExitNumerical;
        }
    }
    if (config.experiment_params.value("export_matrices", false)) {
        manifest.write_file("A.coord.txt", matrix_to_coordinate_text(pair.A));
        manifest.write_file("B.coord.txt", matrix_to_coordinate_text(pair.B));
    }
    manifest.write_file("mesh.json", mesh_to_json(config.mesh).dump(2));
    manifest.finalize();
    return kExitOk;
}

inline int cmd_deriv_check(const RunConfig& config) {
    RunManifest manifest(config);
    const json& params = config.experiment_params;
    std::vector<double> steps = params.value("steps", std::vector<double>{1e-2, 5e-3, 2.5e-3});
    const double order_threshold = params.value("order_threshold", 1.9);

    std::vector<json> field_specs;
    if (params.contains("fields"))
        for (const auto& f : params["fields"]) field_specs.push_back(f);
    else {
        // default trio: angular bump through S, axis field near S, interior bump
        const double rc = params.value("r_center", 1.0);
        const double w = params.value("width", 0.45);
        field_specs.push_back(json{{"family", "radial_bump"}, {"k", 2.0}, {"r_center", rc},
                                   {"width", w}, {"amplitude", 0.4}});
        field_specs.push_back(json{{"family", "axis_field"}, {"component", 0}, {"k", 1.0},
                                   {"r_center", rc}, {"width", w}, {"amplitude", 0.4}});
        field_specs.push_back(json{{"family", "interior_bump"}, {"cx", 0.0}, {"cy", 0.75},
                                   {"radius", 0.2}, {"amplitude", 0.4}});
    }

    std::vector<MatrixFdReport> reports;
    bool orders_ok = true;
    for (const auto& fs_ : field_specs) {
        const auto psi = field_library(fs_);
        for (FormKind kind : {FormKind::Stiffness, FormKind::BoundaryMassAll, FormKind::VolumeMass}) {
            auto rep = fd_matrix_check(config.mesh, psi, kind, steps, config.problem);
            if (!rep.rows.back().exact_zero && steps.size() >= 2 && rep.min_order < order_threshold)
                orders_ok = false;
            reports.push_back(std::move(rep));
        }
    }
    manifest.write_file("deriv_matrix.csv", matrix_fd_report_csv(reports));

    // eigenvalue-slope check on the first multiple group, when one exists
    const auto sol = solve_eigen(assemble_problem(config.mesh, config.problem), config.k);
    const auto groups = cluster_eigen(sol, config.cluster_tol);
    bool eigen_ok = true;
    for (const auto& g : groups) {
        if (g.multiplicity < 2) continue;
        const auto psi = field_library(field_specs.front());
        const auto rep = fd_eigenvalue_check(config.problem, config.mesh, psi, g, steps);
        manifest.write_file("deriv_eigen.csv", fd_report_csv(rep));
        manifest.metric("eigen_max_rel_err", rep.max_rel_err_at_smallest);
        eigen_ok = rep.max_rel_err_at_smallest <= params.value("eigen_rel_tol", 0.05);
        break;
    }
    manifest.metric("orders_ok", orders_ok);
    manifest.finalize();
    return (orders_ok && eigen_ok) ? kExitOk : kExitNumerical;
}

inline int cmd_split(const RunConfig& config) {
    RunManifest manifest(config);
    const json& params = config.experiment_params;
    const double budget = params.value("budget", 0.05);
    const double gap_tol = params.value("gap_tol", 1e-3);
    SimplifyOptions opts;
    opts.support = support_region_from_string(params.value("support", "S"));
    opts.candidate_count = params.value("candidates", 12);
    opts.seed = config.seed;

    const auto sol = solve_eigen(assemble_problem(config.mesh, config.problem), config.k);
    const auto groups = cluster_eigen(sol, gap_tol);
    const EigenGroup group = pick_group(groups, params);
    const auto result = split_step(config.problem, config.mesh, group, budget, gap_tol, opts);

    json report;
    report["ok"] = result.ok;
    report["note"] = result.step.note;
    report["budget"] = result.step.budget;
    report["applied_norm"] = result.step.applied_norm;
    report["perturbation"] = result.step.perturbation;
    report["predicted_gap"] = result.step.predicted_gap;
    report["achieved_gap"] = result.step.achieved_gap;
    report["spectrum_before"] = result.step.spectrum_before;
    report["spectrum_after"] = result.step.spectrum_after;
    manifest.write_file("split.json", report.dump(2));
    if (result.ok) manifest.write_file("mesh_after.json", mesh_to_json(result.mesh).dump(2));
    manifest.finalize();
    return result.ok ? kExitOk : kExitInconclusive;
}

inline int run_simplify(const RunConfig& config, bool coefficient_mode) {
    RunManifest manifest(config);
    const json& params = config.experiment_params;
    const int window = params.value("N", 6);
    const double eps = params.value("budget", 0.05);
    const double gap_tol = params.value("gap_tol", 1e-3);
    SimplifyOptions opts;
    opts.support = support_region_from_string(params.value("support", "S"));
    opts.candidate_count = params.value("candidates", 12);
    opts.max_steps = params.value("max_steps", 10);
    opts.seed = config.seed;

    SimplifyResult result;
    if (coefficient_mode) {
        const std::string kind_name = params.value("kind", "boundary_potential");
        CoeffKind kind = CoeffKind::BoundaryPotential;
        if (kind_name == "volume_potential") kind = CoeffKind::VolumePotential;
        else if (kind_name == "matrix_coefficient") kind = CoeffKind::MatrixCoefficient;
        else if (kind_name != "boundary_potential") throw ConfigError("unknown coefficient kind");
        result = coeff_simplify(config.problem, config.mesh, window, eps, gap_tol, kind, opts);
    } else {
        result = greedy_simplify(config.problem, config.mesh, window, eps, gap_tol, opts);
    }
    manifest.write_file("trace.json", trace_to_json(result.trace).dump(2));
    manifest.write_file("spectrum_trajectory.svg", spectrum_trajectory_svg(result.trace));
    if (!coefficient_mode) manifest.write_file("final_mesh.json", mesh_to_json(result.final_mesh).dump(2));
    manifest.metric("termination", result.trace.termination);
    manifest.metric("steps", result.trace.steps.size());
    manifest.metric("total_applied", result.trace.total_applied);
    manifest.finalize();
    if (result.trace.termination == "converged") return kExitOk;
    if (result.trace.termination == "step_failed") return kExitNumerical;
    return kExitInconclusive;
}

inline int cmd_simplify(const RunConfig& config) { return run_simplify(config, false); }
inline int cmd_coeff(const RunConfig& config) { return run_simplify(config, true); }

inline int cmd_oracle_compare(const RunConfig& config) {
    RunManifest manifest(config);
    if (config.mesh.family != "annulus")
        throw ConfigError("oracle-compare requires an annulus domain");
    const double r0 = config.mesh.params.at("r_inner");
    const double r1 = config.mesh.params.at("r_outer");
    const int k_max = config.experiment_params.value("k_max", 8);
    const bool p2 = !config.problem.boundary_mass_type();
    const auto modes = p2 ? oracle::annulus_modes_p2(r0, r1, k_max)
                          : oracle::annulus_modes_p1(r0, r1, k_max);
    manifest.write_file("oracle.csv", oracle_table_csv(modes));

    const auto sol = solve_eigen(assemble_problem(config.mesh, config.problem), config.k);
    const auto expected = oracle::expand_spectrum(modes, sol.count());
    std::ostringstream out;
    out << std::setprecision(17) << "index,fem,oracle,rel_err\n";
    double worst = 0.0;
    for (int i = 0; i < sol.count() && i < static_cast<int>(expected.size()); ++i) {
        const double err = std::abs(sol.lambda(i) - expected[i]) / std::abs(expected[i]);
        worst = std::max(worst, err);
        out << i << "," << sol.lambda(i) << "," << expected[i] << "," << err << "\n";
    }
    manifest.write_file("oracle_compare.csv", out.str());
    manifest.metric("max_rel_err", worst);
    manifest.finalize();
    return worst <= config.experiment_params.value("rel_tol", 0.01) ? kExitOk : kExitNumerical;
}

inline int cmd_w_scan(const RunConfig& config) {
    RunManifest manifest(config);
    const auto sol = solve_eigen(assemble_problem(config.mesh, config.problem), config.k);
    const auto groups = cluster_eigen(sol, config.cluster_tol);
    const EigenGroup group = pick_group(groups, config.experiment_params);
    const auto report = w_obstruction_scan(config.problem, sol, group, config.mesh);
    std::ostringstream out;
    out << std::setprecision(17) << "pair_r,pair_s,edge,mid_x,mid_y,residual\n";
    for (const auto& pair : report.pairs)
        for (std::size_t e = 0; e < report.w_edges.size(); ++e)
            out << pair.r << "," << pair.s << "," << report.w_edges[e] << ","
                << report.edge_midpoints[e].x() << "," << report.edge_midpoints[e].y() << ","
                << pair.edge_residual[e] << "\n";
    manifest.write_file("wscan.csv", out.str());
    json summary = json::array();
    for (const auto& pair : report.pairs)
        summary.push_back(json{{"r", pair.r}, {"s", pair.s}, {"l2", pair.l2}, {"max", pair.max_abs}});
    manifest.metric("pairs", summary);
    manifest.finalize();
    return kExitOk;
}

/// Merge a run directory's tables into one human-readable summary. Performs
/// no recomputation.
inline int cmd_report(const fs::path& dir, std::string* out_text = nullptr) {
    const fs::path manifest_path = dir / "manifest.json";
    if (!fs::exists(manifest_path)) return kExitConfig;
    const json manifest = json::parse(read_text_file(manifest_path.string()));
    std::ostringstream out;
    out << "# Run summary\n\n";
    out << "- version: " << manifest.value("version", "?") << "\n";
    out << "- created: " << manifest.value("created", "?") << "\n";
    out << "- input hash: " << manifest.value("input_hash", "?") << "\n";
    if (manifest.contains("config") && manifest["config"].contains("experiment"))
        out << "- experiment: " << manifest["config"]["experiment"].value("type", "?") << "\n";
    if (manifest.contains("metrics") && !manifest["metrics"].empty()) {
        out << "\n## Metrics\n\n";
        for (const auto& [k, v] : manifest["metrics"].items()) out << "- " << k << ": " << v.dump() << "\n";
    }
    for (const auto& f : manifest.value("files", json::array())) {
        const std::string name = f.get<std::string>();
        if (name.size() < 4 || name.substr(name.size() - 4) != ".csv") continue;
        out << "\n## " << name << "\n\n```\n";
        out << read_text_file((dir / name).string());
        out << "```\n";
    }
    const std::string text = out.str();
    write_text_file((dir / "summary.md").string(), text);
    if (out_text) *out_text = text;
    return kExitOk;
}

/// Dispatch by experiment type. Errors propagate as exceptions; the CLI maps
/// ConfigError/ArgumentError to exit 2 and numerical errors to exit 3.
inline int run_experiment(const RunConfig& config) {
    if (config.experiment == "solve") return cmd_solve(config);
    if (config.experiment == "deriv-check") return cmd_deriv_check(config);
    if (config.experiment == "split") return cmd_split(config);
    if (config.experiment == "simplify") return cmd_simplify(config);
    if (config.experiment == "coeff") return cmd_coeff(config);
    if (config.experiment == "oracle-compare") return cmd_oracle_compare(config);
    if (config.experiment == "w-scan") return cmd_w_scan(config);
    throw ConfigError("unknown experiment type '" + config.experiment + "'");
}

} // namespace steklov
