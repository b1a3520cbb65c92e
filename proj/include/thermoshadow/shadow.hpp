#pragma once

#include "picard.hpp"

namespace thermoshadow {

struct ShadowSettings {
    double tol = 1e-12;
    int max_iterations = 200;
    double theta0 = 1.0;
    bool use_cache = true;  // reuse the potential when sigma ignores temperature
    LinearSettings linear;
};

struct ShadowResult {
    double theta = 0.0;        // spatially uniform limit temperature
    ScalarField phi;           // potential at that temperature
    double residual = 0.0;     // |G(theta)| of the scalar balance
    double residual_scale = 1.0;
    double lower_bound = 0.0;  // from the coefficient envelopes
    double upper_bound = std::numeric_limits<double>::infinity();
    int iterations = 0;
    int potential_solves = 0;
    int cache_hits = 0;
    bool used_bisection = false;
    double bracket_lo = std::numeric_limits<double>::quiet_NaN();
    double bracket_hi = std::numeric_limits<double>::quiet_NaN();
    bool multiple_roots_suspected = false;
};

/// Potential at a spatially uniform temperature: the thermoelectric drive
/// vanishes for a constant iterate, leaving the flux data alone.
inline ScalarField solve_shadow_potential(const TriMesh& mesh, const CoefficientModel& model,
                                          const ProblemData& data, double theta,
                                          const LinearSettings& settings = {},
                                          SolveStats* stats = nullptr) {
    ScalarField uniform(mesh, theta);
    return solve_potential(mesh, model, data, uniform, settings, stats);
}

namespace detail {

struct ScalarBalance {
    double value = 0.0;     // G = theta * exchange - dissipation - supply
    double exchange = 0.0;  // integral of alpha(., theta) h over the boundary
    double dissipation = 0.0;
    double supply = 0.0;
};

inline double supply_integral(const TriMesh& mesh, const ProblemData& data) {
    std::vector<double> load = assemble_volume_load(mesh, data.g);
    double s = 0.0;
    for (double v : load) s += v;
    return s;
}

inline ScalarBalance scalar_balance(const TriMesh& mesh, const CoefficientModel& model,
                                    const ProblemData& data, double theta,
                                    const ScalarField& phi, double supply) {
    ScalarBalance b;
    b.supply = supply;
    for (int e = 0; e < mesh.num_edges(); ++e)
        b.exchange += eval_alpha(model, mesh.edge_midpoint(e), theta) *
                      data.h[static_cast<size_t>(e)] * mesh.edge_length(e);
    auto grads = elem_gradients(phi);
    for (int t = 0; t < mesh.num_triangles(); ++t)
        b.dissipation += eval_sigma(model, mesh.centroid(t), theta) * mesh.tri_area(t) *
                         dot(grads[static_cast<size_t>(t)], grads[static_cast<size_t>(t)]);
    b.value = theta * b.exchange - b.dissipation - b.supply;
    return b;
}

inline double balance_scale(const ScalarBalance& b, double theta) {
    return std::max({std::abs(theta * b.exchange), std::abs(b.dissipation) + std::abs(b.supply),
                     1e-300});
}

} // namespace detail

/// Residual of the scalar limit equation at a given uniform temperature.
/// Evaluates to exactly zero when every datum vanishes.
inline double implicit_equation_residual(const TriMesh& mesh, const CoefficientModel& model,
                                         const ProblemData& data, double theta,
                                         const ScalarField& phi) {
    double supply = detail::supply_integral(mesh, data);
    return detail::scalar_balance(mesh, model, data, theta, phi, supply).value;
}

inline double implicit_equation_residual(const TriMesh& mesh, const CoefficientModel& model,
                                         const ProblemData& data, double theta,
                                         const LinearSettings& settings = {}) {
    ScalarField phi = solve_shadow_potential(mesh, model, data, theta, settings);
    return implicit_equation_residual(mesh, model, data, theta, phi);
}

/// Solves the scalar limit equation G(theta) = 0 by the natural fixed point
/// theta <- (dissipation + supply) / exchange, with a sign-change bisection
/// fallback on an expanding bracket. When several roots are suspected the
/// smallest positive one is returned and flagged.
inline ShadowResult solve_shadow(const TriMesh& mesh, const CoefficientModel& model,
                                 const ProblemData& data, const ShadowSettings& settings = {}) {
    if (!(settings.theta0 > 0.0) || !std::isfinite(settings.theta0))
        throw InvalidInput("shadow: starting temperature must be positive and finite");
    if (settings.max_iterations < 1) throw InvalidInput("shadow: need at least one iteration");

    ShadowResult res;
    const double supply = detail::supply_integral(mesh, data);
    double h_abs = 0.0;
    for (int e = 0; e < mesh.num_edges(); ++e)
        h_abs += std::abs(data.h[static_cast<size_t>(e)]) * mesh.edge_length(e);
    if (h_abs == 0.0 && supply == 0.0)
        throw InvalidInput("shadow: all data vanish, the limit temperature is undetermined");

    std::optional<ScalarField> cached;
    const bool cacheable = settings.use_cache && !model.sigma.depends_on_T;
    auto potential_at = [&](double theta) -> ScalarField {
        if (cacheable && cached) {
            ++res.cache_hits;
            return *cached;
        }
        ScalarField phi = solve_shadow_potential(mesh, model, data, theta, settings.linear);
        ++res.potential_solves;
        if (cacheable) cached = phi;
        return phi;
    };
    auto balance_at = [&](double theta) {
        ScalarField phi = potential_at(theta);
        auto b = detail::scalar_balance(mesh, model, data, theta, phi, supply);
        return std::pair<detail::ScalarBalance, ScalarField>(b, std::move(phi));
    };

    auto [bal, phi] = balance_at(settings.theta0);
    // A position-independent coefficient against compatible flux data makes the
    // exchange integral vanish identically: the scalar equation has no root.
    if (std::abs(bal.exchange) <= 1e-12 * std::max(model.alpha_cap() * h_abs, 1e-300))
        throw InvalidInput(
            "shadow: the exchange integral of alpha * h vanishes (position-independent "
            "coefficient with balanced flux); the limit equation has no solution");

    double theta = settings.theta0;
    bool converged = false;
    for (int it = 1; it <= settings.max_iterations; ++it) {
        res.iterations = it;
        if (bal.exchange <= 0.0) break;  // fixed point undefined, try bisection
        double next = (bal.dissipation + bal.supply) / bal.exchange;
        if (!std::isfinite(next) || next <= 0.0) break;
        auto [bal_next, phi_next] = balance_at(next);
        bool step_ok = std::abs(next - theta) <= settings.tol * std::max(std::abs(next), 1.0);
        double scale = detail::balance_scale(bal_next, next);
        theta = next;
        bal = bal_next;
        phi = std::move(phi_next);
        if (step_ok && std::abs(bal.value) <= settings.tol * scale) {
            converged = true;
            break;
        }
    }

    auto value_at = [&](double t) { return balance_at(t).first.value; };
    auto bisect = [&](double lo, double glo, double hi) {
        for (int i = 0; i < 200 && hi - lo > settings.tol * std::max(hi, 1.0); ++i) {
            double mid = 0.5 * (lo + hi);
            double gm = value_at(mid);
            if (gm == 0.0) return mid;
            if ((glo < 0.0) != (gm < 0.0)) {
                hi = mid;
            } else {
                lo = mid;
                glo = gm;
            }
        }
        return 0.5 * (lo + hi);
    };

    if (!converged) {
        double lo = 1e-8, glo = value_at(lo), hi = 0.0;
        bool found = false;
        for (double cand = 1e-7; cand <= 1e8 * 1.0000001; cand *= 10.0) {
            double g = value_at(cand);
            if ((glo < 0.0) != (g < 0.0)) {
                hi = cand;
                found = true;
                break;
            }
            lo = cand;
            glo = g;
        }
        if (!found)
            throw SolveError(SolveError::Kind::Stalled,
                             "shadow: no sign change of the limit equation in [1e-8, 1e8]");
        res.used_bisection = true;
        res.bracket_lo = lo;
        res.bracket_hi = hi;
        theta = bisect(lo, glo, hi);
        auto [bal_b, phi_b] = balance_at(theta);
        bal = bal_b;
        phi = std::move(phi_b);
    }

    // With temperature-sensitive laws the equation can cross zero more than
    // once; scan a log grid and prefer the smallest positive root.
    if (model.alpha.depends_on_T || model.sigma.depends_on_T) {
        double prev_t = 1e-4, prev_g = value_at(prev_t);
        int crossings = 0;
        double first_lo = 0.0, first_hi = 0.0, first_glo = 0.0;
        for (int j = 1; j <= 16; ++j) {
            double t = 1e-4 * std::pow(10.0, 0.5 * j);
            double g = value_at(t);
            if ((prev_g < 0.0) != (g < 0.0)) {
                ++crossings;
                if (crossings == 1) {
                    first_lo = prev_t;
                    first_hi = t;
                    first_glo = prev_g;
                }
            }
            prev_t = t;
            prev_g = g;
        }
        if (crossings > 1) {
            res.multiple_roots_suspected = true;
            double small = bisect(first_lo, first_glo, first_hi);
            if (small < theta * (1.0 - 1e-6)) {
                theta = small;
                auto [bal_s, phi_s] = balance_at(theta);
                bal = bal_s;
                phi = std::move(phi_s);
            }
        }
    }

    res.theta = theta;
    res.phi = std::move(phi);
    res.residual = std::abs(bal.value);
    res.residual_scale = detail::balance_scale(bal, theta);

    FieldNorms pn = norms(res.phi);
    res.lower_bound = (model.sigma_lo() * pn.h1_semi * pn.h1_semi + supply) /
                      std::max(model.alpha_cap() * h_abs, 1e-300);
    return res;
}

struct SweepRow {
    double k = 0.0;
    bool converged = false;
    int iterations = 0;
    double grad_norm = 0.0;       // L2 norm of the temperature gradient
    double oscillation = 0.0;     // max - min of the temperature
    double rel_distance = 0.0;    // max |theta - limit| / limit
    double mean = 0.0;            // average temperature
};

struct SweepResult {
    std::vector<SweepRow> rows;
    ShadowResult limit;
    double slope = std::numeric_limits<double>::quiet_NaN();  // log-log fit of grad_norm vs k
};

/// Least-squares slope of ln(y) against ln(x).
inline double fit_loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2)
        throw InvalidInput("slope fit needs at least two matched samples");
    double mx = 0.0, my = 0.0;
    std::vector<double> lx(x.size()), ly(y.size());
    for (size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0))
            throw InvalidInput("slope fit needs positive samples");
        lx[i] = std::log(x[i]);
        ly[i] = std::log(y[i]);
        mx += lx[i];
        my += ly[i];
    }
    mx /= static_cast<double>(x.size());
    my /= static_cast<double>(y.size());
    double num = 0.0, den = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        num += (lx[i] - mx) * (ly[i] - my);
        den += (lx[i] - mx) * (lx[i] - mx);
    }
    if (den == 0.0) throw InvalidInput("slope fit needs at least two distinct abscissae");
    return num / den;
}

/// Runs the coupled fixed point across a conductivity ladder, warm-starting
/// each level from the previous temperature, and compares against the uniform
/// limit state.
inline SweepResult k_sweep(const TriMesh& mesh, const CoefficientModel& model,
                           const ProblemData& data, const std::vector<double>& k_list,
                           const PicardSettings& picard = {}, const ShadowSettings& shadow = {}) {
    if (k_list.empty()) throw InvalidInput("sweep: empty conductivity list");
    for (size_t i = 0; i < k_list.size(); ++i) {
        if (!(k_list[i] > 0.0)) throw InvalidInput("sweep: conductivities must be positive");
        if (i > 0 && !(k_list[i] > k_list[i - 1]))
            throw InvalidInput("sweep: conductivities must be strictly increasing");
    }

    SweepResult out;
    out.limit = solve_shadow(mesh, model, data, shadow);

    ScalarField warm;
    bool have_warm = false;
    double total_area = 0.0;
    for (int t = 0; t < mesh.num_triangles(); ++t) total_area += mesh.tri_area(t);

    for (double k : k_list) {
        ProblemData dk = data;
        dk.k = k;
        PicardResult pr = run_picard(mesh, model, dk, picard, have_warm ? &warm : nullptr);

        SweepRow row;
        row.k = k;
        row.converged = pr.converged;
        row.iterations = static_cast<int>(pr.history.size());
        FieldNorms tn = norms(pr.theta);
        row.grad_norm = tn.h1_semi;
        double lo = pr.theta[0], hi = pr.theta[0], integral = 0.0;
        for (int i = 0; i < mesh.num_vertices(); ++i) {
            lo = std::min(lo, pr.theta[i]);
            hi = std::max(hi, pr.theta[i]);
        }
        for (int t = 0; t < mesh.num_triangles(); ++t) {
            const auto& v = mesh.tri[static_cast<size_t>(t)];
            integral += mesh.tri_area(t) * (pr.theta[v[0]] + pr.theta[v[1]] + pr.theta[v[2]]) / 3.0;
        }
        row.oscillation = hi - lo;
        row.mean = integral / total_area;
        double dist = 0.0;
        for (int i = 0; i < mesh.num_vertices(); ++i)
            dist = std::max(dist, std::abs(pr.theta[i] - out.limit.theta));
        row.rel_distance = dist / std::max(std::abs(out.limit.theta), 1e-300);
        out.rows.push_back(row);

        warm = pr.theta;
        have_warm = true;
    }

    std::vector<double> ks, gs;
    for (const auto& r : out.rows)
        if (r.converged && r.grad_norm > 0.0) {
            ks.push_back(r.k);
            gs.push_back(r.grad_norm);
        }
    if (ks.size() >= 2) out.slope = fit_loglog_slope(ks, gs);
    return out;
}

} // namespace thermoshadow
