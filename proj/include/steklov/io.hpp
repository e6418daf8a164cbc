#pragma once

#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "steklov/errors.hpp"
#include "steklov/forms.hpp"
#include "steklov/geometry.hpp"
#include "steklov/search.hpp"
#include "steklov/spectrum.hpp"

namespace steklov {

// ---------------------------------------------------------------------------
// Mesh serialization.
// ---------------------------------------------------------------------------

inline json mesh_to_json(const Mesh& mesh) {
    json doc;
    doc["vertices"] = json::array();
    for (const auto& v : mesh.vertices) doc["vertices"].push_back({v.x(), v.y()});
    doc["triangles"] = json::array();
    for (const auto& t : mesh.triangles) doc["triangles"].push_back({t[0], t[1], t[2]});
    doc["boundary"] = json::array();
    for (const auto& be : mesh.boundary) doc["boundary"].push_back({be.a, be.b, to_string(be.tag)});
    if (!mesh.family.empty()) doc["family"] = mesh.family;
    if (!mesh.params.empty()) {
        json p;
        for (const auto& [k, v] : mesh.params) p[k] = v;
        doc["params"] = p;
    }
    return doc;
}

inline Mesh mesh_from_json(const json& doc) {
    Mesh mesh;
    for (const auto& v : doc.at("vertices"))
        mesh.vertices.emplace_back(v.at(0).get<double>(), v.at(1).get<double>());
    for (const auto& t : doc.at("triangles"))
        mesh.triangles.push_back({t.at(0).get<int>(), t.at(1).get<int>(), t.at(2).get<int>()});
    for (const auto& b : doc.at("boundary"))
        mesh.boundary.push_back(
            {b.at(0).get<int>(), b.at(1).get<int>(), boundary_tag_from_string(b.at(2).get<std::string>())});
    mesh.family = doc.value("family", "");
    if (doc.contains("params"))
        for (const auto& [k, v] : doc["params"].items()) mesh.params[k] = v.get<double>();
    validate_mesh(mesh);
    return mesh;
}

// ---------------------------------------------------------------------------
// Plain-text exports.
// ---------------------------------------------------------------------------

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw ArgumentError("cannot open '" + path + "' for writing");
    out << content;
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ArgumentError("cannot open '" + path + "' for reading");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

/// Coordinate-format dump (row col value per line) of the stored nonzeros.
inline std::string matrix_to_coordinate_text(const SpMat& m) {
    std::ostringstream out;
    out << std::setprecision(17);
    out << m.rows() << " " << m.cols() << " " << m.nonZeros() << "\n";
    for (int k = 0; k < m.outerSize(); ++k)
        for (SpMat::InnerIterator it(m, k); it; ++it)
            out << it.row() << " " << it.col() << " " << it.value() << "\n";
    return out.str();
}

inline SpMat matrix_from_coordinate_text(const std::string& text) {
    std::istringstream in(text);
    int rows = 0, cols = 0;
    long nnz = 0;
    if (!(in >> rows >> cols >> nnz)) throw ArgumentError("coordinate text: bad header");
    std::vector<Triplet> trip;
    trip.reserve(nnz);
    int r = 0, c = 0;
    double v = 0;
    while (in >> r >> c >> v) trip.emplace_back(r, c, v);
    if (static_cast<long>(trip.size()) != nnz) throw ArgumentError("coordinate text: truncated");
    SpMat m(rows, cols);
    m.setFromTriplets(trip.begin(), trip.end());
    return m;
}

/// Spectrum table: index, lambda, mu, group id, multiplicity.
inline std::string spectrum_table_csv(const EigenSolution& sol, const std::vector<EigenGroup>& groups) {
    std::ostringstream out;
    out << std::setprecision(17);
    out << "index,lambda,mu,group,multiplicity\n";
    std::vector<int> group_of(sol.count(), -1), mult_of(sol.count(), 1);
    for (std::size_t g = 0; g < groups.size(); ++g)
        for (int idx : groups[g].members) {
            group_of[idx] = static_cast<int>(g);
            mult_of[idx] = groups[g].multiplicity;
        }
    for (int i = 0; i < sol.count(); ++i)
        out << i << "," << sol.lambda(i) << "," << sol.mu(i) << "," << group_of[i] << ","
            << mult_of[i] << "\n";
    return out.str();
}

/// Derivative-check table: step, branch, fd slope, predicted, relative error.
inline std::string fd_report_csv(const FdEigenReport& report) {
    std::ostringstream out;
    out << std::setprecision(17);
    out << "step,branch,fd_slope,predicted,rel_err,flagged\n";
    for (const auto& row : report.rows)
        out << row.t << "," << row.branch << "," << row.fd_slope << "," << row.predicted << ","
            << row.rel_err << "," << (row.flagged ? 1 : 0) << "\n";
    return out.str();
}

inline std::string matrix_fd_report_csv(const std::vector<MatrixFdReport>& reports) {
    std::ostringstream out;
    out << std::setprecision(17);
    out << "form,step,residual,exact_zero,order\n";
    for (const auto& rep : reports) {
        for (std::size_t i = 0; i < rep.rows.size(); ++i) {
            out << rep.form << "," << rep.rows[i].t << "," << rep.rows[i].residual << ","
                << (rep.rows[i].exact_zero ? 1 : 0) << ",";
            if (i > 0 && i - 1 < rep.orders.size())
                out << rep.orders[i - 1];
            out << "\n";
        }
    }
    return out.str();
}

inline std::string oracle_table_csv(const std::vector<oracle::AnnulusMode>& modes) {
    std::ostringstream out;
    out << std::setprecision(17);
    out << "variant,k,lambda,multiplicity\n";
    for (const auto& m : modes)
        out << (m.harmonic_type ? "P1" : "P2") << "," << m.k << "," << m.lambda << ","
            << m.multiplicity << "\n";
    return out.str();
}

// ---------------------------------------------------------------------------
// Simplify trace serialization.
// ---------------------------------------------------------------------------

inline json trace_to_json(const SimplifyTrace& trace) {
    json doc;
    doc["mode"] = trace.mode;
    doc["support"] = trace.support;
    doc["window"] = trace.window;
    doc["budget_total"] = trace.budget_total;
    doc["gap_tol"] = trace.gap_tol;
    doc["seed"] = trace.seed;
    doc["termination"] = trace.termination;
    doc["total_applied"] = trace.total_applied;
    doc["final_spectrum"] = trace.final_spectrum;
    doc["steps"] = json::array();
    for (const auto& s : trace.steps) {
        json step;
        step["index"] = s.index;
        step["budget"] = s.budget;
        step["applied_norm"] = s.applied_norm;
        step["step_scale"] = s.step_scale;
        step["perturbation"] = s.perturbation;
        step["deviation"] = s.deviation;
        step["predicted_gap"] = s.predicted_gap;
        step["achieved_gap"] = s.achieved_gap;
        step["spectrum_before"] = s.spectrum_before;
        step["spectrum_after"] = s.spectrum_after;
        step["mult_before"] = s.mult_before;
        step["mult_after"] = s.mult_after;
        step["ok"] = s.ok;
        step["note"] = s.note;
        doc["steps"].push_back(step);
    }
    return doc;
}

// ---------------------------------------------------------------------------
// Static SVG plot of eigenvalue trajectories across simplification steps.
// ---------------------------------------------------------------------------

inline std::string spectrum_trajectory_svg(const SimplifyTrace& trace, int width = 640,
                                           int height = 420) {
    // columns: initial spectrum, then one per recorded step (after states)
    std::vector<std::vector<double>> columns;
    if (!trace.steps.empty()) {
        std::vector<double> first(trace.steps.front().spectrum_before.begin(),
                                  trace.steps.front().spectrum_before.end());
        first.resize(std::min<std::size_t>(first.size(), trace.window));
        columns.push_back(first);
        for (const auto& s : trace.steps)
            if (s.ok) {
                std::vector<double> col(s.spectrum_after.begin(), s.spectrum_after.end());
                col.resize(std::min<std::size_t>(col.size(), trace.window));
                columns.push_back(col);
            }
    }
    if (columns.empty()) columns.push_back(trace.final_spectrum);

    double lo = 1e300, hi = -1e300;
    std::size_t series = 0;
    for (const auto& col : columns) {
        series = std::max(series, col.size());
        for (double v : col) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    if (!(hi > lo)) { hi = lo + 1.0; }
    const double pad = 0.06 * (hi - lo);
    lo -= pad;
    hi += pad;
    const int ml = 60, mr = 16, mt = 16, mb = 36;
    auto xpos = [&](std::size_t step) {
        return columns.size() > 1
                   ? ml + (width - ml - mr) * double(step) / double(columns.size() - 1)
                   : 0.5 * (ml + width - mr);
    };
    auto ypos = [&](double v) { return mt + (height - mt - mb) * (hi - v) / (hi - lo); };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
        << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << height - mb
        << "\" stroke=\"black\"/>\n";
    svg << "<line x1=\"" << ml << "\" y1=\"" << height - mb << "\" x2=\"" << width - mr << "\" y2=\""
        << height - mb << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << width / 2 << "\" y=\"" << height - 8
        << "\" font-size=\"12\" text-anchor=\"middle\">step</text>\n";
    svg << "<text x=\"14\" y=\"" << height / 2
        << "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 14 " << height / 2
        << ")\">lambda</text>\n";
    for (int tick = 0; tick <= 4; ++tick) {
        const double v = lo + (hi - lo) * tick / 4.0;
        svg << "<text x=\"" << ml - 6 << "\" y=\"" << ypos(v) + 4
            << "\" font-size=\"10\" text-anchor=\"end\">" << std::setprecision(4) << v << "</text>\n";
    }
    const char* palette[6] = {"#1b6ca8", "#c23b22", "#2e8540", "#8031a7", "#b8860b", "#148f8f"};
    for (std::size_t s = 0; s < series; ++s) {
        svg << "<polyline fill=\"none\" stroke=\"" << palette[s % 6] << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t c = 0; c < columns.size(); ++c)
            if (s < columns[c].size()) svg << xpos(c) << "," << ypos(columns[c][s]) << " ";
        svg << "\"/>\n";
        for (std::size_t c = 0; c < columns.size(); ++c)
            if (s < columns[c].size())
                svg << "<circle cx=\"" << xpos(c) << "\" cy=\"" << ypos(columns[c][s])
                    << "\" r=\"2.5\" fill=\"" << palette[s % 6] << "\"/>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

} // namespace steklov
