#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"
#include "scenarios.hpp"
#include "thermoshadow/diagnostics.hpp"
#include "thermoshadow/picard.hpp"

using namespace thermoshadow;

TEST_CASE("linear potential is reproduced to solver accuracy at every size", "[diagnostics]") {
    MmsResult res = mms_study("linear-potential", {8, 16});
    REQUIRE(res.rows.size() == 2);
    for (const auto& row : res.rows) {
        CHECK(row.phi_l2 <= 1e-10);
        CHECK(row.phi_h1 <= 1e-10);
        CHECK(row.theta_l2 == 0.0);
    }
    CHECK(std::isnan(res.phi_l2_rate));  // roundoff carries no rate
}

TEST_CASE("quadratic temperature converges at second order in L2, first in H1", "[diagnostics]") {
    MmsResult res = mms_study("quadratic-temperature", {8, 16, 32});
    REQUIRE(res.rows.size() == 3);
    for (size_t i = 1; i < res.rows.size(); ++i) {
        CHECK(res.rows[i].theta_l2 < res.rows[i - 1].theta_l2);
        CHECK(res.rows[i].theta_h1 < res.rows[i - 1].theta_h1);
    }
    CHECK(res.theta_l2_rate >= 1.8);
    CHECK(res.theta_h1_rate >= 0.9);
}

TEST_CASE("coupled pair with kinked potential converges on refinement", "[diagnostics]") {
    MmsResult res = mms_study("coupled-smooth", {8, 16});
    REQUIRE(res.rows.size() == 2);
    CHECK(res.rows[0].theta_l2 / res.rows[1].theta_l2 >= 3.0);
    CHECK(res.rows[0].phi_l2 / res.rows[1].phi_l2 >= 3.0);
    CHECK(res.rows[0].theta_h1 / res.rows[1].theta_h1 >= 1.7);
    CHECK(res.rows[0].phi_h1 / res.rows[1].phi_h1 >= 1.7);
}

TEST_CASE("manufactured study rejects bad inputs", "[diagnostics]") {
    CHECK_THROWS_AS(mms_study("linear-potential", {}), InvalidInput);
    CHECK_THROWS_AS(mms_study("linear-potential", {7}), InvalidInput);
    CHECK_THROWS_AS(mms_study("no-such-problem", {8}), InvalidInput);
}

TEST_CASE("trace constants respect the constant-field lower bounds", "[diagnostics]") {
    TriMesh m8 = generate_rect_mesh(8, 8, {Side::Left});
    TraceConstants t8 = estimate_trace_constants(m8);
    // A constant field evaluates the first quotient to |Sigma| / |Gamma| = 3
    // and the second to perimeter / area = 4.
    CHECK(t8.c1 >= 3.0);
    CHECK(t8.c2 >= 4.0);
    CHECK(t8.c1 < 50.0);
    CHECK(t8.c2 < 50.0);
    // The iteration stops when the Rayleigh value stagnates at 1e-10, which
    // leaves the eigenvector residual near the square root of that; the value
    // itself is accurate to roughly residual squared.
    CHECK(t8.c1_residual <= 1e-4);
    CHECK(t8.c2_residual <= 1e-4);

    TriMesh m16 = generate_rect_mesh(16, 16, {Side::Left});
    TraceConstants t16 = estimate_trace_constants(m16);
    // The discrete suprema grow with the space.
    CHECK(t16.c1 >= t8.c1 - 1e-8);
    CHECK(t16.c2 >= t8.c2 - 1e-8);
}

TEST_CASE("monolithic oracle agrees with the fixed point", "[diagnostics]") {
    auto sc = scenarios::standard();
    TriMesh m = generate_rect_mesh(6, 6, {Side::Left});
    ProblemData data = scenarios::make_data(sc, m);

    PicardSettings ps;
    ps.tol = 1e-12;
    PicardResult pic = run_picard(m, sc.model, data, ps);
    REQUIRE(pic.converged);

    NewtonResult nw = newton_oracle(m, sc.model, data);
    REQUIRE(nw.converged);
    CHECK(std::abs(nw.multiplier) <= 1e-8);

    double dtheta = 0.0, dphi = 0.0;
    for (int i = 0; i < m.num_vertices(); ++i) {
        dtheta = std::max(dtheta, std::abs(nw.theta[i] - pic.theta[i]));
        dphi = std::max(dphi, std::abs(nw.phi[i] - pic.phi[i]));
    }
    CHECK(dtheta <= 1e-6);
    CHECK(dphi <= 1e-6);
}

TEST_CASE("monolithic oracle handles temperature-dependent conductivity", "[diagnostics]") {
    auto sc = scenarios::tanh_sigma();
    TriMesh m = generate_rect_mesh(4, 4, {Side::Left});
    ProblemData data = scenarios::make_data(sc, m);

    NewtonResult nw = newton_oracle(m, sc.model, data);
    REQUIRE(nw.converged);

    PicardSettings ps;
    ps.tol = 1e-12;
    PicardResult pic = run_picard(m, sc.model, data, ps);
    REQUIRE(pic.converged);
    for (int i = 0; i < m.num_vertices(); ++i) {
        CHECK(std::abs(nw.theta[i] - pic.theta[i]) <= 1e-6);
        CHECK(std::abs(nw.phi[i] - pic.phi[i]) <= 1e-6);
    }
}

TEST_CASE("monolithic oracle refuses large meshes", "[diagnostics]") {
    auto sc = scenarios::standard();
    TriMesh m = generate_rect_mesh(15, 15, {Side::Left});  // 256 vertices
    ProblemData data = scenarios::make_data(sc, m);
    CHECK_THROWS_AS(newton_oracle(m, sc.model, data), InvalidInput);
}
