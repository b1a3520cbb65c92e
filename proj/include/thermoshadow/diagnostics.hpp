#pragma once

#include "shadow.hpp"

namespace thermoshadow {

struct MmsRow {
    int n = 0;     // cells per side
    int dofs = 0;  // vertices
    double theta_l2 = 0.0, theta_h1 = 0.0;
    double phi_l2 = 0.0, phi_h1 = 0.0;
};

struct MmsResult {
    std::string problem;
    std::vector<MmsRow> rows;
    // Log-log rates of error against mesh size h = 1/n; NaN when the field is
    // not part of the study or the errors sit at roundoff.
    double theta_l2_rate = std::numeric_limits<double>::quiet_NaN();
    double theta_h1_rate = std::numeric_limits<double>::quiet_NaN();
    double phi_l2_rate = std::numeric_limits<double>::quiet_NaN();
    double phi_h1_rate = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

/// Quadrature errors of a P1 field against a smooth reference: L2 by the
/// three-edge-midpoint rule, gradient by the centroid value.
struct FieldError {
    double l2 = 0.0;
    double h1 = 0.0;  // full norm
};

inline FieldError field_error(const ScalarField& u, const std::function<double(Vec2)>& exact,
                              const std::function<Vec2(Vec2)>& exact_grad) {
    const TriMesh& mesh = *u.mesh;
    double l2 = 0.0, semi = 0.0;
    auto grads = elem_gradients(u);
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const auto& v = mesh.tri[static_cast<size_t>(t)];
        double area = mesh.tri_area(t);
        Vec2 p[3] = {mesh.vertex[v[0]], mesh.vertex[v[1]], mesh.vertex[v[2]]};
        double uv[3] = {u[v[0]], u[v[1]], u[v[2]]};
        for (int s = 0; s < 3; ++s) {
            Vec2 mid = 0.5 * (p[s] + p[(s + 1) % 3]);
            double uh = 0.5 * (uv[s] + uv[(s + 1) % 3]);
            double d = uh - exact(mid);
            l2 += area / 3.0 * d * d;
        }
        Vec2 gd = grads[static_cast<size_t>(t)] - exact_grad(mesh.centroid(t));
        semi += area * dot(gd, gd);
    }
    FieldError e;
    e.l2 = std::sqrt(l2);
    e.h1 = std::sqrt(l2 + semi);
    return e;
}

inline double rate_or_nan(const std::vector<int>& sizes, const std::vector<double>& errors) {
    std::vector<double> hs, es;
    for (size_t i = 0; i < sizes.size(); ++i) {
        // errors at solver roundoff carry no rate information
        if (!(errors[i] > 1e-11)) return std::numeric_limits<double>::quiet_NaN();
        hs.push_back(1.0 / sizes[i]);
        es.push_back(errors[i]);
    }
    if (hs.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    return fit_loglog_slope(hs, es);  // error ~ h^p yields slope p
}

} // namespace detail

/// Manufactured-solution studies on the unit square, exchange side = left.
///
/// "linear-potential": a linear potential driven purely by boundary flux; the
/// discrete space contains it, so the error is solver roundoff at every size.
///
/// "quadratic-temperature": 3 - x^2 - y^2 with the exchange coefficient 0.5
/// and flux data chosen so the exchange condition holds at edge midpoints;
/// the weights stay nonnegative and the system stays definite.
///
/// "coupled-smooth": a full coupled pair. The potential carries a mesh-aligned
/// gradient kink at x = 1/2 that exactly cancels the thermoelectric drive, so
/// the total current field is smooth; the temperature equation picks up a
/// boundary correction because the manufactured pair does not satisfy the
/// homogeneous exchange condition.
inline MmsResult mms_study(const std::string& problem, const std::vector<int>& sizes,
                           const LinearSettings& linear = {}) {
    if (sizes.empty()) throw InvalidInput("manufactured study: no mesh sizes given");
    for (int n : sizes)
        if (n < 2 || n % 2 != 0)
            throw InvalidInput("manufactured study: sizes must be even and at least 2");

    MmsResult out;
    out.problem = problem;
    std::vector<double> t_l2, t_h1, p_l2, p_h1;

    for (int n : sizes) {
        TriMesh mesh = generate_rect_mesh(n, n, {Side::Left});
        MmsRow row;
        row.n = n;
        row.dofs = mesh.num_vertices();

        if (problem == "linear-potential") {
            auto exact = [](Vec2 p) { return p.x - 0.5; };  // boundary mean of x is 1/2
            auto exact_grad = [](Vec2) { return Vec2{1.0, 0.0}; };
            CoefficientModel model = make_model(sigma_constant(1.0), alpha_constant(0.1));
            ProblemData data = make_problem_data(
                mesh, 1.0, [](Vec2) { return 0.0; },
                [](Vec2 p, BoundaryTag) {
                    if (p.x == 0.0) return -1.0;
                    if (p.x == 1.0) return 1.0;
                    return 0.0;
                },
                1.0, -1.0);
            ScalarField zero(mesh);
            ScalarField phi = solve_potential(mesh, model, data, zero, linear);
            auto err = detail::field_error(phi, exact, exact_grad);
            row.phi_l2 = err.l2;
            row.phi_h1 = err.h1;
        } else if (problem == "quadratic-temperature") {
            auto exact = [](Vec2 p) { return 3.0 - p.x * p.x - p.y * p.y; };
            auto exact_grad = [](Vec2 p) { return Vec2{-2.0 * p.x, -2.0 * p.y}; };
            CoefficientModel model = make_model(sigma_constant(1.0), alpha_constant(0.5));
            ProblemData data = make_problem_data(
                mesh, 1.0, [](Vec2) { return 4.0; },
                [&](Vec2 p, BoundaryTag) {
                    Vec2 nrm{0.0, 0.0};
                    if (p.x == 0.0) nrm = {-1.0, 0.0};
                    else if (p.x == 1.0) nrm = {1.0, 0.0};
                    else if (p.y == 0.0) nrm = {0.0, -1.0};
                    else nrm = {0.0, 1.0};
                    return -dot(exact_grad(p), nrm) / (0.5 * exact(p));
                },
                10.0, -10.0);
            ScalarField zero(mesh);
            ScalarField theta = solve_temperature(mesh, model, data, zero, zero, linear);
            auto err = detail::field_error(theta, exact, exact_grad);
            row.theta_l2 = err.l2;
            row.theta_h1 = err.h1;
        } else if (problem == "coupled-smooth") {
            const double pi = M_PI;
            auto theta_exact = [pi](Vec2 p) {
                return 1.0 + std::cos(pi * p.x) * (0.25 + 0.125 * std::cos(pi * p.y));
            };
            auto theta_grad = [pi](Vec2 p) {
                return Vec2{-pi * std::sin(pi * p.x) * (0.25 + 0.125 * std::cos(pi * p.y)),
                            -0.125 * pi * std::cos(pi * p.x) * std::sin(pi * p.y)};
            };
            auto alpha_of = [](Vec2 p) { return p.x <= 0.5 ? 0.2 : 0.1; };
            // Harmonic stream: psi = -x + y/3 + (x^2 - y^2)/3, normal slope
            // +1 on the left side and -1/3 on the other three.
            auto psi = [](Vec2 p) {
                return -p.x + p.y / 3.0 + (p.x * p.x - p.y * p.y) / 3.0;
            };
            auto psi_grad = [](Vec2 p) {
                return Vec2{-1.0 + 2.0 * p.x / 3.0, 1.0 / 3.0 - 2.0 * p.y / 3.0};
            };
            auto phi_exact = [&](Vec2 p) {
                return psi(p) - alpha_of(p) * theta_exact(p) - (p.x > 0.5 ? 0.1 : 0.0);
            };
            auto phi_grad = [&](Vec2 p) {
                Vec2 tg = theta_grad(p);
                return psi_grad(p) - alpha_of(p) * tg;
            };

            CoefficientModel model = make_model(sigma_constant(1.0), alpha_xstep(0.2, 0.1, 0.5));
            const double kcond = 1.0;
            auto g_fun = [&, pi](Vec2 p) {
                double lap = -pi * pi * std::cos(pi * p.x) *
                             (0.25 + 0.25 * std::cos(pi * p.y));
                Vec2 gp = psi_grad(p);
                return -kcond * lap - dot(gp, gp);
            };
            ProblemData data = make_problem_data(
                mesh, kcond, g_fun,
                [](Vec2, BoundaryTag tag) { return tag == BoundaryTag::Gamma ? 1.0 : -1.0 / 3.0; },
                1.0, -1.0 / 3.0);
            data.boundary_correction.resize(static_cast<size_t>(mesh.num_edges()));
            for (int e = 0; e < mesh.num_edges(); ++e) {
                Vec2 mid = mesh.edge_midpoint(e);
                Vec2 nrm = mesh.outward_normal(e);
                double hval = data.h[static_cast<size_t>(e)];
                data.boundary_correction[static_cast<size_t>(e)] =
                    kcond * dot(theta_grad(mid), nrm) + alpha_of(mid) * theta_exact(mid) * hval;
            }

            PicardSettings ps;
            ps.tol = 1e-12;
            ps.linear = linear;
            PicardResult pr = run_picard(mesh, model, data, ps);
            if (!pr.converged)
                throw SolveError(SolveError::Kind::MaxIterations,
                                 "coupled manufactured study did not converge at n = " +
                                     std::to_string(n));

            // The solver pins the discrete boundary mean of phi to zero; align
            // the reference the same way before measuring.
            std::vector<double> w = boundary_trace_weights(mesh);
            double w_sum = 0.0, w_phi = 0.0;
            for (int i = 0; i < mesh.num_vertices(); ++i) {
                w_sum += w[i];
                w_phi += w[i] * phi_exact(mesh.vertex[i]);
            }
            double shift = w_phi / w_sum;
            auto phi_ref = [&](Vec2 p) { return phi_exact(p) - shift; };

            auto te = detail::field_error(pr.theta, theta_exact, theta_grad);
            auto pe = detail::field_error(pr.phi, phi_ref, phi_grad);
            row.theta_l2 = te.l2;
            row.theta_h1 = te.h1;
            row.phi_l2 = pe.l2;
            row.phi_h1 = pe.h1;
        } else {
            throw InvalidInput("unknown manufactured problem '" + problem + "'");
        }

        out.rows.push_back(row);
        t_l2.push_back(row.theta_l2);
        t_h1.push_back(row.theta_h1);
        p_l2.push_back(row.phi_l2);
        p_h1.push_back(row.phi_h1);
    }

    std::vector<int> ns;
    for (const auto& r : out.rows) ns.push_back(r.n);
    out.theta_l2_rate = detail::rate_or_nan(ns, t_l2);
    out.theta_h1_rate = detail::rate_or_nan(ns, t_h1);
    out.phi_l2_rate = detail::rate_or_nan(ns, p_l2);
    out.phi_h1_rate = detail::rate_or_nan(ns, p_h1);
    return out;
}

struct NewtonResult {
    ScalarField theta, phi;
    double multiplier = 0.0;  // enforces the zero boundary mean of phi
    int iterations = 0;
    bool converged = false;
    double residual_norm = 0.0;
};

/// Monolithic damped Newton on the full coupled discrete system, with a
/// finite-difference Jacobian and a dense factorization. Deliberately slow
/// and independent of the fixed-point machinery; restricted to small meshes.
inline NewtonResult newton_oracle(const TriMesh& mesh, const CoefficientModel& model,
                                  const ProblemData& data, int max_iterations = 50,
                                  double tol = 1e-11) {
    const int n = mesh.num_vertices();
    if (n > 200)
        throw InvalidInput("newton oracle is restricted to meshes with at most 200 vertices");
    const int m = 2 * n + 1;
    std::vector<double> w = boundary_trace_weights(mesh);

    auto residual = [&](const std::vector<double>& u, std::vector<double>& r) {
        ScalarField theta(mesh), phi(mesh);
        for (int i = 0; i < n; ++i) {
            theta[i] = u[static_cast<size_t>(i)];
            phi[i] = u[static_cast<size_t>(n + i)];
        }
        double lambda = u[static_cast<size_t>(2 * n)];

        JouleField jf = joule_source(mesh, model, theta, phi);
        SparseSystem tsys = build_temperature_system(mesh, model, data, theta, jf.volumetric);
        std::vector<double> At;
        tsys.A.mul(theta.v, At);

        SparseSystem psys = build_potential_system(mesh, model, data, theta);
        std::vector<double> Ap;
        psys.A.mul(phi.v, Ap);

        r.resize(static_cast<size_t>(m));
        double wphi = 0.0;
        for (int i = 0; i < n; ++i) {
            r[static_cast<size_t>(i)] = At[static_cast<size_t>(i)] - tsys.b[static_cast<size_t>(i)];
            r[static_cast<size_t>(n + i)] =
                Ap[static_cast<size_t>(i)] - psys.b[static_cast<size_t>(i)] + lambda * w[static_cast<size_t>(i)];
            wphi += w[static_cast<size_t>(i)] * phi[i];
        }
        r[static_cast<size_t>(2 * n)] = wphi;
    };

    auto norm_inf = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s = std::max(s, std::abs(x));
        return s;
    };

    std::vector<double> u(static_cast<size_t>(m), 0.0), r, r_trial, u_trial;
    residual(u, r);
    NewtonResult res;

    for (int it = 1; it <= max_iterations; ++it) {
        double rnorm = norm_inf(r);
        res.iterations = it - 1;
        res.residual_norm = rnorm;
        if (rnorm <= tol * std::max(1.0, norm_inf(u))) {
            res.converged = true;
            break;
        }

        // Forward-difference Jacobian, column by column.
        TripletList trip(m);
        std::vector<double> r_pert;
        for (int j = 0; j < m; ++j) {
            double step = 1e-7 * (1.0 + std::abs(u[static_cast<size_t>(j)]));
            double saved = u[static_cast<size_t>(j)];
            u[static_cast<size_t>(j)] = saved + step;
            residual(u, r_pert);
            u[static_cast<size_t>(j)] = saved;
            for (int i = 0; i < m; ++i) {
                double d = (r_pert[static_cast<size_t>(i)] - r[static_cast<size_t>(i)]) / step;
                if (d != 0.0) trip.add(i, j, d);
            }
        }
        SparseSystem jac{trip.compressed(), r, std::nullopt};
        for (double& v : jac.b) v = -v;
        std::vector<double> delta = solve_dense(jac);

        double t = 1.0;
        bool accepted = false;
        while (t >= 1.0 / 64.0) {
            u_trial = u;
            for (int i = 0; i < m; ++i) u_trial[static_cast<size_t>(i)] += t * delta[static_cast<size_t>(i)];
            residual(u_trial, r_trial);
            if (norm_inf(r_trial) < (1.0 - 1e-4 * t) * rnorm) {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted) {
            // take the smallest step anyway; stagnation shows up as nonconvergence
            u_trial = u;
            for (int i = 0; i < m; ++i)
                u_trial[static_cast<size_t>(i)] += (1.0 / 64.0) * delta[static_cast<size_t>(i)];
            residual(u_trial, r_trial);
        }
        u.swap(u_trial);
        r.swap(r_trial);
    }

    if (!res.converged) {
        double rnorm = norm_inf(r);
        res.residual_norm = rnorm;
        res.converged = rnorm <= tol * std::max(1.0, norm_inf(u));
        res.iterations = max_iterations;
    }

    res.theta = ScalarField(mesh);
    res.phi = ScalarField(mesh);
    for (int i = 0; i < n; ++i) {
        res.theta[i] = u[static_cast<size_t>(i)];
        res.phi[i] = u[static_cast<size_t>(n + i)];
    }
    res.multiplier = u[static_cast<size_t>(2 * n)];
    return res;
}

struct TraceConstants {
    double c1 = 0.0;  // boundary-to-interior quotient against Gamma-weighted energy
    double c2 = 0.0;  // whole-boundary trace against the full H1 norm
    int c1_iterations = 0;
    int c2_iterations = 0;
    double c1_residual = 0.0;
    double c2_residual = 0.0;
};

namespace detail {

struct PowerResult {
    double value = 0.0;
    int iterations = 0;
    double residual = 0.0;
};

/// Largest eigenvalue of B x = mu A x by power iteration on A^{-1} B,
/// with A symmetric positive definite.
inline PowerResult generalized_power(const CsrMatrix& A, const CsrMatrix& B, int max_iterations,
                                     double tol) {
    const int n = A.n;
    std::vector<double> v(static_cast<size_t>(n), 1.0), Bv, next;
    PowerResult out;
    double mu_prev = 0.0;
    for (int it = 1; it <= max_iterations; ++it) {
        out.iterations = it;
        B.mul(v, Bv);
        SparseSystem sys{A, Bv, std::nullopt};
        next = solve_spd(sys, 1e-13, 20000);
        double scale = 0.0;
        for (double x : next) scale = std::max(scale, std::abs(x));
        if (scale == 0.0) throw SolveError(SolveError::Kind::Stalled, "power iteration collapsed");
        for (double& x : next) x /= scale;
        double num = B.quad(next, next);
        double den = A.quad(next, next);
        double mu = num / den;
        v.swap(next);
        if (it > 1 && std::abs(mu - mu_prev) <= tol * std::max(std::abs(mu), 1e-300)) {
            mu_prev = mu;
            break;
        }
        mu_prev = mu;
    }
    out.value = mu_prev;

    // Residual || B v - mu A v || / || B v ||.
    B.mul(v, Bv);
    std::vector<double> Av;
    A.mul(v, Av);
    double rn = 0.0, bn = 0.0;
    for (int i = 0; i < n; ++i) {
        double d = Bv[static_cast<size_t>(i)] - out.value * Av[static_cast<size_t>(i)];
        rn += d * d;
        bn += Bv[static_cast<size_t>(i)] * Bv[static_cast<size_t>(i)];
    }
    out.residual = bn > 0.0 ? std::sqrt(rn / bn) : 0.0;
    return out;
}

} // namespace detail

/// Discrete sharp constants of the two trace inequalities used by the
/// coercivity bookkeeping, computed as generalized eigenvalues over the P1
/// space. They grow (slightly) under refinement toward the continuous values.
inline TraceConstants estimate_trace_constants(const TriMesh& mesh, int max_iterations = 10000,
                                               double tol = 1e-10) {
    CsrMatrix K = assemble_stiffness(mesh, [](Vec2) { return 1.0; });
    std::vector<double> on_gamma(static_cast<size_t>(mesh.num_edges()), 0.0);
    std::vector<double> on_sigma(static_cast<size_t>(mesh.num_edges()), 0.0);
    std::vector<double> on_all(static_cast<size_t>(mesh.num_edges()), 1.0);
    for (int e = 0; e < mesh.num_edges(); ++e)
        (mesh.edge[static_cast<size_t>(e)].tag == BoundaryTag::Gamma ? on_gamma : on_sigma)[static_cast<size_t>(e)] = 1.0;

    CsrMatrix M_gamma = assemble_boundary_mass(mesh, on_gamma);
    CsrMatrix M_sigma = assemble_boundary_mass(mesh, on_sigma);
    CsrMatrix M_all = assemble_boundary_mass(mesh, on_all);
    CsrMatrix M_vol = assemble_mass(mesh);

    // c1: sup of the Sigma trace against gradient energy plus the Gamma trace.
    TripletList a1(K.n);
    for (int i = 0; i < K.n; ++i)
        for (int k = K.row_ptr[static_cast<size_t>(i)]; k < K.row_ptr[static_cast<size_t>(i) + 1]; ++k)
            a1.add(i, K.col[static_cast<size_t>(k)], K.val[static_cast<size_t>(k)]);
    for (int i = 0; i < M_gamma.n; ++i)
        for (int k = M_gamma.row_ptr[static_cast<size_t>(i)]; k < M_gamma.row_ptr[static_cast<size_t>(i) + 1]; ++k)
            a1.add(i, M_gamma.col[static_cast<size_t>(k)], M_gamma.val[static_cast<size_t>(k)]);

    // c2: sup of the full boundary trace against the full H1 norm.
    TripletList a2(K.n);
    for (int i = 0; i < K.n; ++i)
        for (int k = K.row_ptr[static_cast<size_t>(i)]; k < K.row_ptr[static_cast<size_t>(i) + 1]; ++k)
            a2.add(i, K.col[static_cast<size_t>(k)], K.val[static_cast<size_t>(k)]);
    for (int i = 0; i < M_vol.n; ++i)
        for (int k = M_vol.row_ptr[static_cast<size_t>(i)]; k < M_vol.row_ptr[static_cast<size_t>(i) + 1]; ++k)
            a2.add(i, M_vol.col[static_cast<size_t>(k)], M_vol.val[static_cast<size_t>(k)]);

    auto p1 = detail::generalized_power(a1.compressed(), M_sigma, max_iterations, tol);
    auto p2 = detail::generalized_power(a2.compressed(), M_all, max_iterations, tol);

    TraceConstants tc;
    tc.c1 = p1.value;
    tc.c1_iterations = p1.iterations;
    tc.c1_residual = p1.residual;
    tc.c2 = p2.value;
    tc.c2_iterations = p2.iterations;
    tc.c2_residual = p2.residual;
    return tc;
}

} // namespace thermoshadow
