#pragma once

#include <limits>

#include "solvers.hpp"

namespace thermoshadow {

struct PicardSettings {
    double tol = 1e-10;            // relative update in the full H1 norm
    int max_iterations = 200;
    double damping = 1.0;          // relaxation of the temperature update
    bool adaptive_damping = true;  // halve after three consecutive growths
    LinearSettings linear;
};

struct PicardRow {
    int iteration = 0;
    double update_rel = 0.0;
    double damping = 1.0;
    double theta_h1 = 0.0;
    double phi_h1 = 0.0;
};

struct PicardResult {
    ScalarField theta, phi;
    bool converged = false;
    double final_update = std::numeric_limits<double>::infinity();
    std::vector<PicardRow> history;
    int potential_solves = 0;
    int temperature_solves = 0;
};

namespace detail {

inline double h1_full(const ScalarField& u) {
    FieldNorms n = norms(u);
    return std::hypot(n.l2, n.h1_semi);
}

} // namespace detail

/// Decoupled fixed-point iteration on the temperature: freeze the iterate,
/// solve the potential, solve the temperature with the induced heat release,
/// then relax toward the result. Nonconvergence is reported in the result,
/// not thrown; linear-solver failures still propagate.
inline PicardResult run_picard(const TriMesh& mesh, const CoefficientModel& model,
                               const ProblemData& data, const PicardSettings& settings = {},
                               const ScalarField* initial = nullptr) {
    if (!(settings.tol > 0.0)) throw InvalidInput("picard: tolerance must be positive");
    if (settings.max_iterations < 1) throw InvalidInput("picard: need at least one iteration");
    if (!(settings.damping > 0.0 && settings.damping <= 1.0))
        throw InvalidInput("picard: damping must lie in (0, 1]");

    PicardResult res;
    ScalarField xi = initial ? *initial : ScalarField(mesh);
    if (initial && initial->size() != mesh.num_vertices())
        throw InvalidInput("picard: initial field does not match the mesh");

    double lambda = settings.damping;
    double prev_update = std::numeric_limits<double>::infinity();
    int growth_streak = 0;

    for (int it = 1; it <= settings.max_iterations; ++it) {
        ScalarField phi = solve_potential(mesh, model, data, xi, settings.linear);
        ++res.potential_solves;
        ScalarField theta = solve_temperature(mesh, model, data, xi, phi, settings.linear);
        ++res.temperature_solves;

        ScalarField diff(mesh);
        for (int i = 0; i < mesh.num_vertices(); ++i) diff[i] = theta[i] - xi[i];
        double update = detail::h1_full(diff) / std::max(detail::h1_full(theta), 1e-14);

        res.history.push_back({it, update, lambda, detail::h1_full(theta), detail::h1_full(phi)});
        res.theta = theta;
        res.phi = phi;
        res.final_update = update;

        if (update <= settings.tol) {
            res.converged = true;
            return res;
        }

        if (settings.adaptive_damping) {
            if (update > prev_update) {
                if (++growth_streak >= 3) {
                    lambda = std::max(lambda / 2.0, 1.0 / 16.0);
                    growth_streak = 0;
                }
            } else {
                growth_streak = 0;
            }
        }
        prev_update = update;

        for (int i = 0; i < mesh.num_vertices(); ++i)
            xi[i] = (1.0 - lambda) * xi[i] + lambda * theta[i];
    }
    return res;  // converged stays false; history tells the story
}

struct WeakFormResiduals {
    double theta_rel = 0.0;  // temperature equation, assembled at the pair itself
    double phi_rel = 0.0;    // potential equation against the mean-free data
};

/// Residuals of both discrete equations re-assembled at (theta, phi). For a
/// converged fixed point these shrink to the linear-solver tolerance.
inline WeakFormResiduals weak_form_residuals(const TriMesh& mesh, const CoefficientModel& model,
                                             const ProblemData& data, const ScalarField& theta,
                                             const ScalarField& phi) {
    WeakFormResiduals out;

    JouleField jf = joule_source(mesh, model, theta, phi);
    SparseSystem tsys = build_temperature_system(mesh, model, data, theta, jf.volumetric);
    std::vector<double> At;
    tsys.A.mul(theta.v, At);
    double rnorm = 0.0, bnorm = 0.0;
    for (size_t i = 0; i < At.size(); ++i) {
        rnorm += (At[i] - tsys.b[i]) * (At[i] - tsys.b[i]);
        bnorm += tsys.b[i] * tsys.b[i];
    }
    out.theta_rel = std::sqrt(rnorm) / std::max(std::sqrt(bnorm), 1e-300);

    SparseSystem psys = build_potential_system(mesh, model, data, theta);
    double mean = 0.0;
    for (double v : psys.b) mean += v;
    mean /= static_cast<double>(psys.b.size());
    std::vector<double> Ap;
    psys.A.mul(phi.v, Ap);
    rnorm = bnorm = 0.0;
    for (size_t i = 0; i < Ap.size(); ++i) {
        double bi = psys.b[i] - mean;
        rnorm += (Ap[i] - bi) * (Ap[i] - bi);
        bnorm += bi * bi;
    }
    out.phi_rel = std::sqrt(rnorm) / std::max(std::sqrt(bnorm), 1e-300);
    return out;
}

/// Global energy bookkeeping: boundary exchange against interior production.
/// The discrete identity makes this vanish to solver accuracy at a solution;
/// it is a cross-check, not a convergence criterion.
inline double energy_balance_defect(const TriMesh& mesh, const CoefficientModel& model,
                                    const ProblemData& data, const ScalarField& theta,
                                    const ScalarField& phi) {
    double lhs = 0.0;
    for (int e = 0; e < mesh.num_edges(); ++e) {
        const auto& s = mesh.edge[static_cast<size_t>(e)];
        double t_mid = 0.5 * (theta[s.a] + theta[s.b]);
        double al = eval_alpha(model, mesh.edge_midpoint(e), t_mid);
        lhs += al * data.h[static_cast<size_t>(e)] * mesh.edge_length(e) * 0.5 *
               (theta[s.a] + theta[s.b]);
    }
    JouleField jf = joule_source(mesh, model, theta, phi);
    double rhs = 0.0;
    for (int t = 0; t < mesh.num_triangles(); ++t)
        rhs += mesh.tri_area(t) * jf.volumetric[static_cast<size_t>(t)];
    std::vector<double> g_load = assemble_volume_load(mesh, data.g);
    for (double v : g_load) rhs += v;
    return std::abs(lhs - rhs) / std::max({std::abs(lhs), std::abs(rhs), 1.0});
}

/// Closed-form contraction bookkeeping for the fixed-point map, evaluated from
/// the declared coefficient envelopes and the data norms. The embedding and
/// trace constants default to one and are reported alongside the result; the
/// inequalities are sufficient conditions, not sharp ones.
struct SmallnessLedger {
    double embed_const = 1.0;  // Sobolev embedding surrogate
    double trace_const = 1.0;  // boundary trace surrogate
    double sigma_hi = 0.0;
    double alpha_hi = 0.0;
    double mu_hi = 0.0;
    double h_norm = 0.0;  // L2 over the boundary
    double g_norm = 0.0;  // L2 over the domain
    double quad_coeff_a = 0.0;   // A = sigma_hi * alpha_hi * (alpha_hi + mu_hi)
    double quad_coeff_b = 0.0;   // B = sigma_hi * (2 alpha_hi + mu_hi)
    double a2 = 0.0, a1 = 0.0, a0 = 0.0;
    bool contraction_ok = false;
    double radius_lo = std::numeric_limits<double>::quiet_NaN();
    double radius_hi = std::numeric_limits<double>::quiet_NaN();
};

inline SmallnessLedger smallness_ledger(const CoefficientModel& model, const ProblemData& data,
                                        const TriMesh& mesh, double embed_const = 1.0,
                                        double trace_const = 1.0) {
    if (!(embed_const > 0.0) || !(trace_const > 0.0))
        throw InvalidInput("smallness ledger: constants must be positive");
    SmallnessLedger led;
    led.embed_const = embed_const;
    led.trace_const = trace_const;
    led.sigma_hi = model.sigma_hi();
    led.alpha_hi = model.alpha_cap();
    led.mu_hi = model.alpha.mu_cap;

    double h2 = 0.0;
    for (int e = 0; e < mesh.num_edges(); ++e)
        h2 += data.h[static_cast<size_t>(e)] * data.h[static_cast<size_t>(e)] * mesh.edge_length(e);
    led.h_norm = std::sqrt(h2);

    double g2 = 0.0;
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const auto& v = mesh.tri[static_cast<size_t>(t)];
        Vec2 p0 = mesh.vertex[v[0]], p1 = mesh.vertex[v[1]], p2 = mesh.vertex[v[2]];
        double s = data.g(0.5 * (p0 + p1)) * data.g(0.5 * (p0 + p1)) +
                   data.g(0.5 * (p1 + p2)) * data.g(0.5 * (p1 + p2)) +
                   data.g(0.5 * (p2 + p0)) * data.g(0.5 * (p2 + p0));
        g2 += mesh.tri_area(t) / 3.0 * s;
    }
    led.g_norm = std::sqrt(g2);

    const double K = led.embed_const, C = led.trace_const;
    const double sg = led.sigma_hi, al = led.alpha_hi, mu = led.mu_hi;
    led.quad_coeff_a = sg * al * (al + mu);
    led.quad_coeff_b = sg * (2.0 * al + mu);
    led.a2 = K * sg * al * (1.0 + C * sg) * (al * (2.0 + C * sg) + mu);
    led.a1 = K * C * sg * (2.0 * al * (1.0 + sg) + mu) * led.h_norm;
    led.a0 = K * (C * C * sg * led.h_norm * led.h_norm + led.g_norm);

    double disc = (1.0 - led.a1) * (1.0 - led.a1) - 4.0 * led.a0 * led.a2;
    led.contraction_ok = led.a1 < 1.0 && disc > 0.0;
    if (led.contraction_ok) {
        if (led.a2 > 0.0) {
            led.radius_lo = (1.0 - led.a1 - std::sqrt(disc)) / (2.0 * led.a2);
            led.radius_hi = (1.0 - led.a1 + std::sqrt(disc)) / (2.0 * led.a2);
        } else {
            led.radius_lo = led.a0 / (1.0 - led.a1);
            led.radius_hi = std::numeric_limits<double>::infinity();
        }
    }
    return led;
}

} // namespace thermoshadow
