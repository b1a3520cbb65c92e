#include <catch2/catch_amalgamated.hpp>

#include <cstring>

#include "helpers.hpp"
#include "scenarios.hpp"
#include "thermoshadow/picard.hpp"

using namespace thermoshadow;

namespace {

void check_converged_pair(const TriMesh& m, const CoefficientModel& model, const ProblemData& data,
                          const PicardResult& res) {
    REQUIRE(res.converged);
    REQUIRE(res.history.size() >= 1);
    CHECK(res.potential_solves == static_cast<int>(res.history.size()));
    CHECK(res.temperature_solves == static_cast<int>(res.history.size()));

    WeakFormResiduals r = weak_form_residuals(m, model, data, res.theta, res.phi);
    CHECK(r.theta_rel <= 1e-8);
    CHECK(r.phi_rel <= 1e-8);

    std::vector<double> w = boundary_trace_weights(m);
    double pinned = 0.0;
    for (int i = 0; i < m.num_vertices(); ++i) pinned += w[i] * res.phi[i];
    CHECK(std::abs(pinned) <= 1e-10);

    CHECK(energy_balance_defect(m, model, data, res.theta, res.phi) <= 1e-7);
}

} // namespace

TEST_CASE("fixed point converges on the position-dependent-coefficient setup", "[picard]") {
    auto sc = scenarios::standard();
    TriMesh m = generate_rect_mesh(8, 8, {Side::Left});
    ProblemData data = scenarios::make_data(sc, m);
    PicardSettings ps;
    ps.tol = 1e-12;
    PicardResult res = run_picard(m, sc.model, data, ps);
    check_converged_pair(m, sc.model, data, res);

    // The update history settles monotonically, give or take stagnation noise.
    for (size_t i = 1; i + 1 < res.history.size(); ++i)
        CHECK(res.history[i + 1].update_rel <= 1.5 * res.history[i].update_rel);
}

TEST_CASE("fixed point converges when the exchange form needs the dense path", "[picard]") {
    auto sc = scenarios::constant_alpha();
    TriMesh m = generate_rect_mesh(8, 8, {Side::Left});
    ProblemData data = scenarios::make_data(sc, m);
    PicardSettings ps;
    ps.tol = 1e-12;
    PicardResult res = run_picard(m, sc.model, data, ps);
    check_converged_pair(m, sc.model, data, res);
}

TEST_CASE("fixed point converges with temperature-dependent conductivity", "[picard]") {
    auto sc = scenarios::tanh_sigma();
    TriMesh m = generate_rect_mesh(8, 8, {Side::Left});
    ProblemData data = scenarios::make_data(sc, m);
    PicardSettings ps;
    ps.tol = 1e-12;
    PicardResult res = run_picard(m, sc.model, data, ps);
    check_converged_pair(m, sc.model, data, res);
}

TEST_CASE("energy bookkeeping on zero fields exposes the full supply", "[picard]") {
    auto sc = scenarios::standard();
    TriMesh m = generate_rect_mesh(8, 8, {Side::Left});
    ProblemData data = scenarios::make_data(sc, m);
    data.g = [](Vec2) { return 1.0; };
    ScalarField zero(m);
    // Exchange side is zero, production integrates to exactly one.
    CHECK(energy_balance_defect(m, sc.model, data, zero, zero) == 1.0);
}

TEST_CASE("damping changes the path but not the fixed point", "[picard]") {
    auto sc = scenarios::standard();
    TriMesh m = generate_rect_mesh(6, 6, {Side::Left});
    ProblemData data = scenarios::make_data(sc, m);

    PicardSettings full;
    full.tol = 1e-12;
    PicardSettings half;
    half.tol = 1e-12;
    half.damping = 0.5;
    half.adaptive_damping = false;
    half.max_iterations = 400;

    PicardResult a = run_picard(m, sc.model, data, full);
    PicardResult b = run_picard(m, sc.model, data, half);
    REQUIRE(a.converged);
    REQUIRE(b.converged);
    CHECK(b.history.size() >= a.history.size());
    for (int i = 0; i < m.num_vertices(); ++i) CHECK(close_rel(a.theta[i], b.theta[i], 1e-8));
    for (int i = 0; i < m.num_vertices(); ++i) CHECK(close_rel(a.phi[i], b.phi[i], 1e-8));
}

TEST_CASE("restarting at the fixed point finishes in one sweep", "[picard]") {
    auto sc = scenarios::standard();
    TriMesh m = generate_rect_mesh(6, 6, {Side::Left});
    ProblemData data = scenarios::make_data(sc, m);
    PicardSettings ps;
    ps.tol = 1e-10;
    PicardResult first = run_picard(m, sc.model, data, ps);
    REQUIRE(first.converged);
    PicardResult second = run_picard(m, sc.model, data, ps, &first.theta);
    REQUIRE(second.converged);
    CHECK(second.history.size() == 1);
}

TEST_CASE("iteration budget exhaustion reports instead of throwing", "[picard]") {
    auto sc = scenarios::standard();
    TriMesh m = generate_rect_mesh(4, 4, {Side::Left});
    ProblemData data = scenarios::make_data(sc, m);
    PicardSettings ps;
    ps.tol = 1e-12;
    ps.max_iterations = 1;
    PicardResult res = run_picard(m, sc.model, data, ps);
    CHECK_FALSE(res.converged);
    CHECK(res.history.size() == 1);
    CHECK(std::isfinite(res.final_update));
}

TEST_CASE("picard settings are validated", "[picard]") {
    auto sc = scenarios::standard();
    TriMesh m = generate_rect_mesh(2, 2, {Side::Left});
    ProblemData data = scenarios::make_data(sc, m);
    PicardSettings bad;
    bad.tol = 0.0;
    CHECK_THROWS_AS(run_picard(m, sc.model, data, bad), InvalidInput);
    bad = {};
    bad.damping = 1.5;
    CHECK_THROWS_AS(run_picard(m, sc.model, data, bad), InvalidInput);
    bad = {};
    bad.max_iterations = 0;
    CHECK_THROWS_AS(run_picard(m, sc.model, data, bad), InvalidInput);
}

TEST_CASE("contraction bookkeeping reproduces the worked example", "[picard]") {
    TriMesh m = generate_rect_mesh(4, 4, {Side::Left});
    CoefficientModel model = make_model(sigma_constant(1.0), alpha_constant(0.1));
    ProblemData data;
    data.k = 1.0;
    // |h| = 0.05 on the whole boundary of length 4 gives the L2 norm 0.1;
    // g = 0.01 over the unit square gives the L2 norm 0.01.
    data.g = [](Vec2) { return 0.01; };
    data.h.assign(m.num_edges(), 0.05);

    SmallnessLedger led = smallness_ledger(model, data, m);
    CHECK(led.sigma_hi == 1.0);
    CHECK(led.alpha_hi == Catch::Approx(0.1).epsilon(1e-15));
    CHECK(led.mu_hi == 0.0);
    CHECK(led.h_norm == Catch::Approx(0.1).epsilon(1e-13));
    CHECK(led.g_norm == Catch::Approx(0.01).epsilon(1e-13));
    CHECK(led.quad_coeff_a == Catch::Approx(0.01).epsilon(1e-14));
    CHECK(led.quad_coeff_b == Catch::Approx(0.2).epsilon(1e-14));
    CHECK(led.a2 == Catch::Approx(0.06).epsilon(1e-13));
    CHECK(led.a1 == Catch::Approx(0.04).epsilon(1e-13));
    CHECK(led.a0 == Catch::Approx(0.02).epsilon(1e-13));
    REQUIRE(led.contraction_ok);

    double disc = (1.0 - led.a1) * (1.0 - led.a1) - 4.0 * led.a0 * led.a2;
    CHECK(led.radius_lo == Catch::Approx((1.0 - led.a1 - std::sqrt(disc)) / (2.0 * led.a2)));
    CHECK(led.radius_hi == Catch::Approx((1.0 - led.a1 + std::sqrt(disc)) / (2.0 * led.a2)));
    CHECK(led.radius_lo > 0.0);
    CHECK(led.radius_hi > led.radius_lo);
}

TEST_CASE("zero data always sits inside the contraction region", "[picard]") {
    TriMesh m = generate_rect_mesh(4, 4, {Side::Left});
    CoefficientModel model = make_model(sigma_constant(1.0), alpha_constant(0.1));
    ProblemData data;
    data.g = [](Vec2) { return 0.0; };
    data.h.assign(m.num_edges(), 0.0);
    SmallnessLedger led = smallness_ledger(model, data, m);
    CHECK(led.a1 == 0.0);
    CHECK(led.a0 == 0.0);
    CHECK(led.contraction_ok);
    CHECK(led.radius_lo == 0.0);
}

TEST_CASE("contraction bookkeeping is reproducible bit for bit", "[picard]") {
    auto sc = scenarios::tanh_sigma();
    TriMesh m = generate_rect_mesh(5, 5, {Side::Left});
    ProblemData data = scenarios::make_data(sc, m);
    SmallnessLedger a = smallness_ledger(sc.model, data, m, 1.0, 1.0);
    SmallnessLedger b = smallness_ledger(sc.model, data, m, 1.0, 1.0);
    // Bit-pattern comparison: the radii are NaN when the region is empty, and
    // NaN must reproduce as the same NaN.
    auto same_bits = [](double x, double y) { return std::memcmp(&x, &y, sizeof x) == 0; };
    CHECK(same_bits(a.h_norm, b.h_norm));
    CHECK(same_bits(a.g_norm, b.g_norm));
    CHECK(same_bits(a.a2, b.a2));
    CHECK(same_bits(a.a1, b.a1));
    CHECK(same_bits(a.a0, b.a0));
    CHECK(same_bits(a.radius_lo, b.radius_lo));
    CHECK(same_bits(a.radius_hi, b.radius_hi));
}
