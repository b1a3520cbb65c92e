#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "diagnostics.hpp"
#include "picard.hpp"
#include "runspec.hpp"
#include "shadow.hpp"

namespace thermoshadow {

/// Command layer shared by the CLI and the tests. Each command writes its
/// artifacts into `out_dir` and returns a process exit code:
///   0  success
///   2  the nonlinear iteration did not converge (outputs are still written)
///   3  the hypothesis audit rejected the spec
/// Malformed specs, unreadable files, and hard solver failures throw instead;
/// the CLI maps those to codes 1 and 2.

namespace cmddetail {

inline void ensure_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec)
        throw InvalidInput("cannot create output directory \"" + dir.string() +
                           "\": " + ec.message());
}

inline std::ofstream open_out(const std::filesystem::path& p) {
    // binary keeps the bytes identical across platforms
    std::ofstream out(p, std::ios::binary);
    if (!out) throw InvalidInput("cannot open \"" + p.string() + "\" for writing");
    return out;
}

inline void write_json_file(const std::filesystem::path& p, const ordered_json& j) {
    auto out = open_out(p);
    out << j.dump(2) << "\n";
}

inline void write_vertex_csv(const std::filesystem::path& p, const TriMesh& mesh,
                             const ScalarField& u) {
    auto out = open_out(p);
    out << "x,y,value\n";
    for (int i = 0; i < mesh.num_vertices(); ++i) {
        Vec2 v = mesh.vertex[static_cast<size_t>(i)];
        out << detail::fmt_g(v.x) << "," << detail::fmt_g(v.y) << "," << detail::fmt_g(u[i])
            << "\n";
    }
}

inline void write_picard_csv(const std::filesystem::path& p, const std::vector<PicardRow>& rows) {
    auto out = open_out(p);
    out << "iteration,update_rel,damping,theta_h1,phi_h1\n";
    for (const auto& r : rows)
        out << r.iteration << "," << detail::fmt_g(r.update_rel) << ","
            << detail::fmt_g(r.damping) << "," << detail::fmt_g(r.theta_h1) << ","
            << detail::fmt_g(r.phi_h1) << "\n";
}

inline ordered_json mesh_to_json(const TriMesh& mesh) {
    ordered_json j;
    j["vertices"] = mesh.num_vertices();
    j["triangles"] = mesh.num_triangles();
    j["boundary_edges"] = mesh.num_edges();
    j["gamma_measure"] = boundary_measure(mesh, BoundaryTag::Gamma);
    j["sigma_measure"] = boundary_measure(mesh, BoundaryTag::Sigma);
    return j;
}

inline ordered_json field_to_json(const ScalarField& u) {
    FieldNorms n = norms(u);
    ordered_json j;
    j["l2"] = n.l2;
    j["h1_semi"] = n.h1_semi;
    j["linf"] = n.linf;
    return j;
}

inline ordered_json validation_to_json(const ValidationReport& report) {
    ordered_json j;
    j["passed"] = report.all_passed();
    ordered_json checks = ordered_json::array();
    for (const auto& c : report.checks) {
        ordered_json cj;
        cj["name"] = c.name;
        cj["passed"] = c.passed;
        cj["witness"] = c.witness;
        checks.push_back(cj);
    }
    j["checks"] = checks;
    ordered_json adv;
    adv["positive"] = report.coercivity_margin.passed;
    adv["value"] = report.coercivity_margin_value;
    adv["witness"] = report.coercivity_margin.witness;
    j["coercivity_margin_advisory"] = adv;
    return j;
}

inline ordered_json clamps_to_json(const CoefficientModel& model) {
    ordered_json j;
    j["sigma"] = model.clamps->sigma.load();
    j["alpha"] = model.clamps->alpha.load();
    j["dalpha"] = model.clamps->dalpha.load();
    return j;
}

inline ordered_json shadow_to_json(const ShadowResult& r) {
    ordered_json j;
    j["theta"] = r.theta;
    j["residual"] = r.residual;
    j["residual_scale"] = r.residual_scale;
    j["lower_bound"] = r.lower_bound;
    j["upper_bound"] = std::isfinite(r.upper_bound) ? ordered_json(r.upper_bound)
                                                    : ordered_json(nullptr);
    j["iterations"] = r.iterations;
    j["potential_solves"] = r.potential_solves;
    j["cache_hits"] = r.cache_hits;
    j["used_bisection"] = r.used_bisection;
    if (std::isfinite(r.bracket_lo) && std::isfinite(r.bracket_hi))
        j["bracket"] = ordered_json::array({r.bracket_lo, r.bracket_hi});
    else
        j["bracket"] = nullptr;
    j["multiple_roots_suspected"] = r.multiple_roots_suspected;
    return j;
}

/// Audit gate shared by the solve path: prints each failed check so the user
/// sees which condition the datum violates, then signals exit code 3.
inline bool audit_passes(const ValidationReport& report) {
    if (report.all_passed()) return true;
    for (const auto& c : report.checks)
        if (!c.passed)
            std::fprintf(stderr, "hypothesis audit failed: %s: %s\n", c.name.c_str(),
                         c.witness.c_str());
    return false;
}

}  // namespace cmddetail

inline int cmd_solve(const RunSpec& spec, const std::string& out_dir) {
    using namespace cmddetail;
    if (spec.has_sweep())
        throw InvalidInput(
            "solve needs a scalar \"problem.k\"; this spec declares \"k_list\" (use sweep)");
    ensure_dir(out_dir);
    std::filesystem::path dir(out_dir);

    ValidationReport report = validate_hypotheses(spec.model, spec.data, spec.mesh);
    if (!audit_passes(report)) return 3;

    PicardResult pr = run_picard(spec.mesh, spec.model, spec.data, spec.picard);
    write_vertex_csv(dir / "theta.csv", spec.mesh, pr.theta);
    write_vertex_csv(dir / "phi.csv", spec.mesh, pr.phi);
    write_picard_csv(dir / "picard.csv", pr.history);

    WeakFormResiduals res = weak_form_residuals(spec.mesh, spec.model, spec.data, pr.theta, pr.phi);
    double defect = energy_balance_defect(spec.mesh, spec.model, spec.data, pr.theta, pr.phi);

    ordered_json j;
    j["command"] = "solve";
    j["mesh"] = mesh_to_json(spec.mesh);
    j["converged"] = pr.converged;
    j["iterations"] = static_cast<int>(pr.history.size());
    j["final_update"] = pr.final_update;
    j["potential_solves"] = pr.potential_solves;
    j["temperature_solves"] = pr.temperature_solves;
    j["theta"] = field_to_json(pr.theta);
    j["phi"] = field_to_json(pr.phi);
    ordered_json rj;
    rj["temperature_weak"] = res.theta_rel;
    rj["potential_weak"] = res.phi_rel;
    rj["energy_balance_defect"] = defect;
    j["residuals"] = rj;
    j["clamps"] = clamps_to_json(spec.model);
    j["validation"] = validation_to_json(report);
    j["spec"] = spec.raw;
    write_json_file(dir / "summary.json", j);
    return pr.converged ? 0 : 2;
}

inline int cmd_sweep(const RunSpec& spec, const std::string& out_dir) {
    using namespace cmddetail;
    if (!spec.has_sweep())
        throw InvalidInput("sweep needs \"problem.k_list\"; this spec declares a scalar \"k\"");
    ensure_dir(out_dir);
    std::filesystem::path dir(out_dir);

    SweepResult sw =
        k_sweep(spec.mesh, spec.model, spec.data, spec.k_list, spec.picard, spec.shadow);

    {
        auto out = open_out(dir / "sweep.csv");
        out << "k,converged,iterations,grad_norm,oscillation,rel_distance,mean\n";
        for (const auto& r : sw.rows)
            out << detail::fmt_g(r.k) << "," << (r.converged ? 1 : 0) << "," << r.iterations
                << "," << detail::fmt_g(r.grad_norm) << "," << detail::fmt_g(r.oscillation) << ","
                << detail::fmt_g(r.rel_distance) << "," << detail::fmt_g(r.mean) << "\n";
    }
    write_json_file(dir / "shadow.json", shadow_to_json(sw.limit));

    bool all_converged = true;
    ordered_json rows = ordered_json::array();
    for (const auto& r : sw.rows) {
        all_converged = all_converged && r.converged;
        ordered_json rj;
        rj["k"] = r.k;
        rj["converged"] = r.converged;
        rj["iterations"] = r.iterations;
        rj["grad_norm"] = r.grad_norm;
        rj["oscillation"] = r.oscillation;
        rj["rel_distance"] = r.rel_distance;
        rj["mean"] = r.mean;
        rows.push_back(rj);
    }

    ordered_json j;
    j["command"] = "sweep";
    j["mesh"] = mesh_to_json(spec.mesh);
    j["grad_norm_slope"] = sw.slope;
    j["limit"] = shadow_to_json(sw.limit);
    j["rows"] = rows;
    j["clamps"] = clamps_to_json(spec.model);
    j["spec"] = spec.raw;
    write_json_file(dir / "summary.json", j);
    return all_converged ? 0 : 2;
}

inline int cmd_shadow(const RunSpec& spec, const std::string& out_dir) {
    using namespace cmddetail;
    ensure_dir(out_dir);
    std::filesystem::path dir(out_dir);

    ShadowResult r = solve_shadow(spec.mesh, spec.model, spec.data, spec.shadow);
    write_vertex_csv(dir / "phi.csv", spec.mesh, r.phi);
    write_json_file(dir / "shadow.json", shadow_to_json(r));

    ordered_json j;
    j["command"] = "shadow";
    j["mesh"] = mesh_to_json(spec.mesh);
    j["shadow"] = shadow_to_json(r);
    j["clamps"] = clamps_to_json(spec.model);
    j["spec"] = spec.raw;
    write_json_file(dir / "summary.json", j);
    return 0;
}

inline int cmd_mms(const RunSpec& spec, const std::string& out_dir) {
    using namespace cmddetail;
    if (!spec.has_mms())
        throw InvalidInput("mms needs an \"mms\" block naming the problem and the sizes");
    ensure_dir(out_dir);
    std::filesystem::path dir(out_dir);

    MmsResult r = mms_study(spec.mms_problem, spec.mms_sizes, spec.picard.linear);

    {
        auto out = open_out(dir / "rates.csv");
        out << "n,dofs,theta_l2,theta_h1,phi_l2,phi_h1\n";
        for (const auto& row : r.rows)
            out << row.n << "," << row.dofs << "," << detail::fmt_g(row.theta_l2) << ","
                << detail::fmt_g(row.theta_h1) << "," << detail::fmt_g(row.phi_l2) << ","
                << detail::fmt_g(row.phi_h1) << "\n";
    }

    ordered_json rows = ordered_json::array();
    for (const auto& row : r.rows) {
        ordered_json rj;
        rj["n"] = row.n;
        rj["dofs"] = row.dofs;
        rj["theta_l2"] = row.theta_l2;
        rj["theta_h1"] = row.theta_h1;
        rj["phi_l2"] = row.phi_l2;
        rj["phi_h1"] = row.phi_h1;
        rows.push_back(rj);
    }
    ordered_json rates;
    rates["theta_l2"] = r.theta_l2_rate;
    rates["theta_h1"] = r.theta_h1_rate;
    rates["phi_l2"] = r.phi_l2_rate;
    rates["phi_h1"] = r.phi_h1_rate;

    ordered_json j;
    j["command"] = "mms";
    j["problem"] = r.problem;
    j["rates"] = rates;
    j["rows"] = rows;
    j["spec"] = spec.raw;
    write_json_file(dir / "summary.json", j);
    return 0;
}

inline int cmd_report(const RunSpec& spec, const std::string& out_dir) {
    using namespace cmddetail;
    ensure_dir(out_dir);
    std::filesystem::path dir(out_dir);

    TraceConstants trace = estimate_trace_constants(spec.mesh);
    ProblemData data = spec.data;
    if (!(data.c1_estimate > 0.0)) data.c1_estimate = trace.c1;  // feed the advisory margin
    ValidationReport report = validate_hypotheses(spec.model, data, spec.mesh);

    double trace_const = trace.c2 > 0.0 ? std::sqrt(trace.c2) : 1.0;
    SmallnessLedger led = smallness_ledger(spec.model, spec.data, spec.mesh, 1.0, trace_const);

    double flux_gamma = 0.0, flux_sigma = 0.0;
    for (int e = 0; e < spec.mesh.num_edges(); ++e) {
        double part = spec.data.h[static_cast<size_t>(e)] * spec.mesh.edge_length(e);
        if (spec.mesh.edge[static_cast<size_t>(e)].tag == BoundaryTag::Gamma)
            flux_gamma += part;
        else
            flux_sigma += part;
    }

    ordered_json j;
    j["command"] = "report";
    j["mesh"] = mesh_to_json(spec.mesh);
    j["validation"] = validation_to_json(report);
    ordered_json tj;
    tj["c1"] = trace.c1;
    tj["c2"] = trace.c2;
    tj["c1_iterations"] = trace.c1_iterations;
    tj["c2_iterations"] = trace.c2_iterations;
    tj["c1_residual"] = trace.c1_residual;
    tj["c2_residual"] = trace.c2_residual;
    j["trace_constants"] = tj;
    ordered_json lj;
    lj["embed_const"] = led.embed_const;
    lj["trace_const"] = led.trace_const;
    lj["sigma_hi"] = led.sigma_hi;
    lj["alpha_hi"] = led.alpha_hi;
    lj["mu_hi"] = led.mu_hi;
    lj["h_norm"] = led.h_norm;
    lj["g_norm"] = led.g_norm;
    lj["quad_coeff_a"] = led.quad_coeff_a;
    lj["quad_coeff_b"] = led.quad_coeff_b;
    lj["a2"] = led.a2;
    lj["a1"] = led.a1;
    lj["a0"] = led.a0;
    lj["contraction_ok"] = led.contraction_ok;
    lj["radius_lo"] = led.radius_lo;
    lj["radius_hi"] = led.radius_hi;
    j["smallness"] = lj;
    ordered_json fj;
    fj["gamma"] = flux_gamma;
    fj["sigma"] = flux_sigma;
    fj["total"] = flux_gamma + flux_sigma;
    j["flux"] = fj;
    j["clamps"] = clamps_to_json(spec.model);
    j["spec"] = spec.raw;
    write_json_file(dir / "report.json", j);

    if (!report.all_passed()) {
        cmddetail::audit_passes(report);  // print the failing checks
        return 3;
    }
    return 0;
}

}  // namespace thermoshadow
