#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"
#include "thermoshadow/solvers.hpp"

using namespace thermoshadow;

namespace {

ProblemData zero_flux_data(const TriMesh& m, double k = 1.0) {
    ProblemData d;
    d.k = k;
    d.g = [](Vec2) { return 0.0; };
    d.h.assign(m.num_edges(), 0.0);
    return d;
}

ScalarField nodal(const TriMesh& m, const std::function<double(Vec2)>& f) {
    ScalarField u(m);
    for (int i = 0; i < m.num_vertices(); ++i) u[i] = f(m.vertex[i]);
    return u;
}

// Slope 0.05 around 0.1, wide band, generous derivative cap: nothing clamps
// in the tested range.
AlphaLaw alpha_affine_in_T() {
    AlphaLaw law;
    law.f = [](Vec2, double T) { return 0.1 + 0.05 * T; };
    law.df = [](Vec2, double) { return 0.05; };
    law.band_lo = -10.0;
    law.band_hi = 10.0;
    law.mu_cap = 0.5;
    law.lipschitz = 0.05;
    law.depends_on_T = true;
    law.name = "affine";
    return law;
}

} // namespace

TEST_CASE("zero net current: potential cancels the thermoelectric drive exactly", "[solvers]") {
    TriMesh m = generate_rect_mesh(4, 4, {Side::Left});
    CoefficientModel model = make_model(sigma_constant(1.0), alpha_constant(0.1));
    ProblemData data = zero_flux_data(m);
    ScalarField xi = nodal(m, [](Vec2 p) { return p.x; });

    ScalarField phi = solve_potential(m, model, data, xi);
    // With constant coefficients the solution is linear: -0.1 x plus the
    // constant that zeroes the boundary mean (the boundary mean of x is 1/2).
    for (int i = 0; i < m.num_vertices(); ++i)
        CHECK(phi[i] == Catch::Approx(-0.1 * m.vertex[i].x + 0.05).margin(1e-10));

    // The pinned functional vanishes identically.
    std::vector<double> w = boundary_trace_weights(m);
    double pinned = 0.0;
    for (int i = 0; i < m.num_vertices(); ++i) pinned += w[i] * phi[i];
    CHECK(std::abs(pinned) <= 1e-12);

    // The resulting current is zero triangle by triangle.
    JouleField jf = joule_source(m, model, xi, phi);
    for (const Vec2& j : jf.current) CHECK(norm(j) <= 1e-10);
}

TEST_CASE("heat release matches the hand-computed value on one triangle", "[solvers]") {
    TriMesh m = generate_rect_mesh(1, 1, {Side::Left});
    CoefficientModel model = make_model(sigma_constant(1.0), alpha_affine_in_T());
    // Triangle 0 has centroid (2/3, 1/3); shift x so its temperature is 2.
    ScalarField xi = nodal(m, [](Vec2 p) { return p.x + 4.0 / 3.0; });
    ScalarField phi = nodal(m, [](Vec2 p) { return p.x; });

    JouleField jf = joule_source(m, model, xi, phi);
    // sigma=1, alpha(2)=0.2, slope 0.05, a=b=(1,0):
    // 0.2*(0.2+0.1)*1 + (0.4+0.1)*1 + 1 = 1.56
    CHECK(jf.volumetric[0] == Catch::Approx(1.56).epsilon(1e-14));
    CHECK(jf.current[0].x == Catch::Approx(-1.2).epsilon(1e-14));
    CHECK(jf.current[0].y == Catch::Approx(0.0).margin(1e-15));
}

TEST_CASE("sigma * heat release equals |current|^2 for temperature-flat coefficients", "[solvers]") {
    TriMesh m = generate_rect_mesh(5, 5, {Side::Left});
    CoefficientModel model =
        make_model(sigma_checkerboard(1.0, 3.0, 4), alpha_xstep(0.2, 0.1, 0.5));
    Lcg rng(11);
    ScalarField xi(m), phi(m);
    for (int i = 0; i < m.num_vertices(); ++i) {
        xi[i] = rng.uniform(-1.0, 1.0);
        phi[i] = rng.uniform(-1.0, 1.0);
    }
    JouleField jf = joule_source(m, model, xi, phi);
    for (int t = 0; t < m.num_triangles(); ++t) {
        double sg = eval_sigma(model, m.centroid(t), detail::field_at_centroid(m, xi, t));
        double j2 = dot(jf.current[t], jf.current[t]);
        CHECK(close_rel(sg * jf.volumetric[t], j2, 1e-12));
    }
}

TEST_CASE("manufactured temperature x^2+y^2 converges under refinement", "[solvers]") {
    // h is chosen so the exchange condition holds at edge midpoints; it is
    // negative on the outflow sides, which makes the Robin form indefinite and
    // exercises the fallback policy. Correctness is asserted either way.
    auto exact = [](Vec2 p) { return p.x * p.x + p.y * p.y; };
    auto solve_on = [&](int nmesh, double& l2_err) {
        TriMesh m = generate_rect_mesh(nmesh, nmesh, {Side::Left});
        CoefficientModel model = make_model(sigma_constant(1.0), alpha_constant(0.5));
        ProblemData data = make_problem_data(
            m, 1.0, [](Vec2) { return -4.0; },
            [&](Vec2 p, BoundaryTag) {
                Vec2 grad{2.0 * p.x, 2.0 * p.y};
                Vec2 n{0.0, 0.0};
                if (p.x == 0.0) n = {-1.0, 0.0};
                else if (p.x == 1.0) n = {1.0, 0.0};
                else if (p.y == 0.0) n = {0.0, -1.0};
                else n = {0.0, 1.0};
                return -dot(grad, n) / (0.5 * (p.x * p.x + p.y * p.y));
            },
            1.0, -10.0);
        ScalarField zero(m);
        ScalarField theta = solve_temperature(m, model, data, zero, zero);
        ScalarField err(m);
        for (int i = 0; i < m.num_vertices(); ++i) err[i] = theta[i] - exact(m.vertex[i]);
        l2_err = norms(err).l2;
    };
    double e8 = 0.0, e16 = 0.0;
    solve_on(8, e8);
    solve_on(16, e16);
    CHECK(e8 < 0.05);
    CHECK(e8 / e16 >= 3.0);  // second-order: the ratio approaches 4
}

TEST_CASE("iterative-with-fallback matches the dense oracle on an indefinite exchange system",
          "[solvers]") {
    TriMesh m = generate_rect_mesh(6, 6, {Side::Left});
    // Constant alpha with compatible h: the exchange row sum is exactly zero,
    // the matrix is nonsingular but not definite.
    CoefficientModel model = make_model(sigma_constant(1.0), alpha_constant(0.1));
    ProblemData data = make_problem_data(
        m, 2.0, [](Vec2) { return 1.0; },
        [](Vec2, BoundaryTag tag) { return tag == BoundaryTag::Gamma ? 1.0 : -1.0 / 3.0; }, 1.0,
        -1.0 / 3.0);
    ScalarField xi = nodal(m, [](Vec2 p) { return 0.3 * p.x - 0.1 * p.y; });
    ScalarField phi = nodal(m, [](Vec2 p) { return 0.2 * p.y; });

    JouleField jf = joule_source(m, model, xi, phi);
    SparseSystem sys = build_temperature_system(m, model, data, xi, jf.volumetric);
    std::vector<double> oracle = solve_dense(sys);
    ScalarField theta = solve_temperature(m, model, data, xi, phi);
    for (int i = 0; i < m.num_vertices(); ++i) CHECK(close_rel(theta[i], oracle[i], 1e-8));
}

TEST_CASE("large conductivity flattens the temperature like 1/k", "[solvers]") {
    TriMesh m = generate_rect_mesh(8, 8, {Side::Left});
    CoefficientModel model = make_model(sigma_constant(1.0), alpha_xstep(0.2, 0.1, 0.5));
    auto h_of = [](Vec2, BoundaryTag tag) { return tag == BoundaryTag::Gamma ? 1.0 : -1.0 / 3.0; };
    ScalarField zero(m);

    auto grad_norm_at = [&](double k) {
        ProblemData data = make_problem_data(m, k, [](Vec2) { return 0.0; }, h_of, 1.0, -1.0 / 3.0);
        ScalarField phi = solve_potential(m, model, data, zero);
        ScalarField theta = solve_temperature(m, model, data, zero, phi);
        return norms(theta).h1_semi;
    };
    double g100 = grad_norm_at(100.0);
    double g10000 = grad_norm_at(10000.0);
    REQUIRE(g100 > 0.0);
    double ratio = g100 / g10000;
    CHECK(ratio >= 60.0);   // the asymptotic ratio is 100
    CHECK(ratio <= 160.0);
}

TEST_CASE("identically zero exchange data is rejected", "[solvers]") {
    TriMesh m = generate_rect_mesh(3, 3, {Side::Left});
    CoefficientModel model = make_model(sigma_constant(1.0), alpha_constant(0.1));
    ProblemData data = zero_flux_data(m);
    ScalarField zero(m);
    try {
        solve_temperature(m, model, data, zero, zero);
        FAIL("expected rejection of h == 0");
    } catch (const InvalidInput& e) {
        CHECK(std::string(e.what()).find("identically zero") != std::string::npos);
    }
}

TEST_CASE("temperature-flat coefficients make both solves shift-invariant", "[solvers]") {
    TriMesh m = generate_rect_mesh(5, 4, {Side::Left});
    CoefficientModel model =
        make_model(sigma_checkerboard(1.0, 2.0, 2), alpha_xstep(0.2, 0.1, 0.5));
    ProblemData data = make_problem_data(
        m, 5.0, [](Vec2 p) { return 0.1 * p.x; },
        [](Vec2, BoundaryTag tag) { return tag == BoundaryTag::Gamma ? 0.5 : -1.0 / 6.0; }, 0.5,
        -1.0 / 6.0);
    Lcg rng(31);
    ScalarField xi(m);
    for (int i = 0; i < m.num_vertices(); ++i) xi[i] = rng.uniform(0.5, 1.5);
    ScalarField xi_shift(m);
    for (int i = 0; i < m.num_vertices(); ++i) xi_shift[i] = xi[i] + 5.0;

    ScalarField phi_a = solve_potential(m, model, data, xi);
    ScalarField phi_b = solve_potential(m, model, data, xi_shift);
    for (int i = 0; i < m.num_vertices(); ++i) CHECK(close_rel(phi_a[i], phi_b[i], 1e-9));

    ScalarField th_a = solve_temperature(m, model, data, xi, phi_a);
    ScalarField th_b = solve_temperature(m, model, data, xi_shift, phi_b);
    for (int i = 0; i < m.num_vertices(); ++i) CHECK(close_rel(th_a[i], th_b[i], 1e-9));
}
