#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "helpers.hpp"
#include "thermoshadow/coefficients.hpp"
#include "thermoshadow/mesh.hpp"

using namespace thermoshadow;

TEST_CASE("tanh conductivity passes through the band midpoint at T=0", "[coefficients]") {
    auto model = make_model(sigma_tanh(1.0, 3.0), alpha_constant(0.1));
    CHECK(eval_sigma(model, {0.5, 0.5}, 0.0) == Catch::Approx(2.0).epsilon(1e-14));
    // tanh is bounded, so even extreme temperatures stay inside the band.
    for (double T : {-1e6, -3.0, 7.5, 1e6}) {
        double v = eval_sigma(model, {0.2, 0.9}, T);
        CHECK(v >= 1.0);
        CHECK(v <= 3.0);
    }
    CHECK(model.clamps->sigma.load() == 0);
}

TEST_CASE("checkerboard conductivity alternates cell parity", "[coefficients]") {
    auto law = sigma_checkerboard(1.0, 3.0, 4);
    CHECK(law.f({0.1, 0.1}, 0.0) == 1.0);   // cell (0,0), even sum
    CHECK(law.f({0.3, 0.1}, 5.0) == 3.0);   // cell (1,0), odd sum
    CHECK(law.f({0.3, 0.3}, 0.0) == 1.0);   // cell (1,1)
    CHECK(law.f({0.99, 0.99}, 0.0) == 1.0); // cell (3,3)
    CHECK_FALSE(law.depends_on_T);
}

TEST_CASE("arctan Seebeck law matches hand values and a finite-difference probe",
          "[coefficients]") {
    auto model = make_model(sigma_constant(1.0), alpha_arctan(0.2, 0.05));
    Vec2 p{0.4, 0.6};
    CHECK(eval_alpha(model, p, 1.0) == Catch::Approx(0.2 + 0.05 * M_PI / 4.0).epsilon(1e-14));
    CHECK(eval_dalpha(model, p, 1.0) == Catch::Approx(0.025).epsilon(1e-14));

    const double step = 1e-6;
    for (double T : {-4.0, -1.0, 0.0, 0.3, 1.0, 2.5, 9.0}) {
        double fd = (model.alpha.f(p, T + step) - model.alpha.f(p, T - step)) / (2.0 * step);
        CHECK(std::abs(eval_dalpha(model, p, T) - fd) < 1e-6);
    }
}

TEST_CASE("rational Seebeck law peaks at T=0 with zero slope", "[coefficients]") {
    auto law = alpha_rational(0.1, 0.05);
    Vec2 p{0.0, 0.0};
    double at0 = law.f(p, 0.0);
    CHECK(at0 == Catch::Approx(0.15));
    CHECK(law.df(p, 0.0) == 0.0);
    for (double T : {-2.0, -0.5, 0.25, 1.0, 6.0}) CHECK(law.f(p, T) < at0);
    // The derivative envelope holds with the declared cap.
    for (double T = -10.0; T <= 10.0; T += 0.05) {
        double cap = law.mu_cap / std::max(1.0, std::abs(T));
        CHECK(std::abs(law.df(p, T)) <= cap + 1e-12);
    }
}

TEST_CASE("xstep Seebeck law is a pure x-step", "[coefficients]") {
    auto law = alpha_xstep(0.2, 0.1, 0.5);
    CHECK(law.f({0.25, 0.9}, -3.0) == 0.2);
    CHECK(law.f({0.75, 0.9}, 3.0) == 0.1);
    CHECK(law.f({0.5, 0.0}, 0.0) == 0.2);  // split belongs to the left value
    CHECK(law.mu_cap == 0.0);
    CHECK_FALSE(law.depends_on_T);
}

TEST_CASE("band excursions are clamped and counted", "[coefficients]") {
    SigmaLaw wild;
    wild.f = [](Vec2, double T) { return 2.0 + T; };  // leaves [1,3] for |T| > 1
    wild.lo = 1.0;
    wild.hi = 3.0;
    wild.depends_on_T = true;
    wild.name = "custom";
    auto model = make_model(wild, alpha_constant(0.1));
    CHECK(eval_sigma(model, {0, 0}, 0.5) == 2.5);
    CHECK(model.clamps->sigma.load() == 0);
    CHECK(eval_sigma(model, {0, 0}, 5.0) == 3.0);
    CHECK(eval_sigma(model, {0, 0}, -9.0) == 1.0);
    CHECK(model.clamps->sigma.load() == 2);
}

TEST_CASE("derivative evaluations respect the far-field envelope", "[coefficients]") {
    AlphaLaw steep;
    steep.f = [](Vec2, double T) { return 0.2 + 0.01 * T; };
    steep.df = [](Vec2, double) { return 0.01; };  // constant slope: violates cap/|T| far out
    steep.band_lo = 0.05;
    steep.band_hi = 0.35;
    steep.mu_cap = 0.01;
    steep.lipschitz = 0.01;
    steep.depends_on_T = true;
    auto model = make_model(sigma_constant(1.0), steep);
    CHECK(eval_dalpha(model, {0, 0}, 0.5) == 0.01);
    CHECK(eval_dalpha(model, {0, 0}, 4.0) == Catch::Approx(0.01 / 4.0));
    CHECK(model.clamps->dalpha.load() == 1);
}

namespace {

// alpha == 0.1 declared inside a wider band, matching the loose-band audit case.
AlphaLaw alpha_const_wide_band() {
    AlphaLaw law;
    law.f = [](Vec2, double) { return 0.1; };
    law.df = [](Vec2, double) { return 0.0; };
    law.band_lo = 0.05;
    law.band_hi = 0.2;
    law.mu_cap = 0.0;
    law.lipschitz = 0.0;
    return law;
}

ProblemData compatible_data(const TriMesh& mesh, double scale = 1.0) {
    return make_problem_data(
        mesh, 10.0, [](Vec2) { return 0.0; },
        [scale](Vec2, BoundaryTag tag) {
            return tag == BoundaryTag::Gamma ? scale : -scale / 3.0;
        },
        scale, -scale / 3.0);
}

} // namespace

TEST_CASE("hypothesis audit passes a clean constant-coefficient datum", "[coefficients]") {
    TriMesh mesh = generate_rect_mesh(8, 8, {Side::Left});
    auto model = make_model(sigma_constant(1.0), alpha_const_wide_band());
    ProblemData data = compatible_data(mesh);
    data.c1_estimate = 3.2;
    auto report = validate_hypotheses(model, data, mesh);
    for (const auto& c : report.checks) {
        INFO(c.name << ": " << c.witness);
        CHECK(c.passed);
    }
    CHECK(report.all_passed());
    // The sufficient-margin entry is advisory and reported separately.
    CHECK_FALSE(report.coercivity_margin.passed);
    CHECK(report.coercivity_margin_value < 0.0);
}

TEST_CASE("hypothesis audit flags an unbalanced boundary current", "[coefficients]") {
    TriMesh mesh = generate_rect_mesh(8, 8, {Side::Left});
    auto model = make_model(sigma_constant(1.0), alpha_const_wide_band());
    ProblemData data = make_problem_data(
        mesh, 10.0, [](Vec2) { return 0.0; },
        [](Vec2, BoundaryTag tag) { return tag == BoundaryTag::Gamma ? 1.0 : -0.5; },
        1.0, -0.5);
    auto report = validate_hypotheses(model, data, mesh);
    bool found = false;
    for (const auto& c : report.checks)
        if (c.name == "flux-compatibility") {
            found = true;
            CHECK_FALSE(c.passed);
            CHECK(c.witness.find("net boundary current") != std::string::npos);
        }
    CHECK(found);
    CHECK_FALSE(report.all_passed());
}

TEST_CASE("hypothesis audit flags a sign-case violation", "[coefficients]") {
    TriMesh mesh = generate_rect_mesh(4, 4, {Side::Left});
    auto model = make_model(sigma_constant(1.0), alpha_constant(0.1), SignCase::Negative);
    ProblemData data = compatible_data(mesh);
    auto report = validate_hypotheses(model, data, mesh);
    bool band_failed = false;
    for (const auto& c : report.checks)
        if (c.name == "alpha-band" && !c.passed) band_failed = true;
    CHECK(band_failed);
}

TEST_CASE("a negative-sign model with mirrored data passes the audit", "[coefficients]") {
    TriMesh mesh = generate_rect_mesh(6, 6, {Side::Left});
    auto model = make_model(sigma_constant(2.0), alpha_constant(-0.1), SignCase::Negative);
    // Mirrored sign structure: h <= -level on Gamma, h <= -floor on Sigma.
    ProblemData data = make_problem_data(
        mesh, 5.0, [](Vec2) { return 0.0; },
        [](Vec2, BoundaryTag tag) { return tag == BoundaryTag::Gamma ? -1.0 : 1.0 / 3.0; },
        1.0, -1.0 / 3.0);
    auto report = validate_hypotheses(model, data, mesh);
    for (const auto& c : report.checks) {
        INFO(c.name << ": " << c.witness);
        CHECK(c.passed);
    }
}

TEST_CASE("clamped evaluation never leaves the declared bands (sampled)", "[coefficients]") {
    Lcg rng(77);
    auto model = make_model(sigma_tanh(0.5, 4.0), alpha_arctan(0.3, 0.02));
    for (int i = 0; i < 500; ++i) {
        Vec2 p{rng.uniform(0, 1), rng.uniform(0, 1)};
        double T = rng.uniform(-1e3, 1e3);
        double s = eval_sigma(model, p, T);
        double a = eval_alpha(model, p, T);
        double da = eval_dalpha(model, p, T);
        CHECK(s >= model.sigma_lo());
        CHECK(s <= model.sigma_hi());
        CHECK(a >= model.alpha.band_lo);
        CHECK(a <= model.alpha.band_hi);
        CHECK(std::abs(da) <= model.alpha.mu_cap / std::max(1.0, std::abs(T)) + 1e-15);
    }
}
