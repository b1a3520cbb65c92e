#pragma once

#include <atomic>
#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "mesh.hpp"

namespace thermoshadow {

/// Whether the Seebeck coefficient is uniformly positive or uniformly negative.
enum class SignCase { Positive, Negative };

/// Counts how often a raw law left its declared band and had to be clamped.
/// Shared between copies of a model so diagnostics see every evaluation.
struct ClampCounters {
    std::atomic<long long> sigma{0}, alpha{0}, dalpha{0};
};

/// Electrical conductivity law sigma(x, T) with declared bounds
/// 0 < sigma_lo <= sigma <= sigma_hi.
struct SigmaLaw {
    std::function<double(Vec2, double)> f;
    double lo = 1.0, hi = 1.0;
    bool depends_on_T = false;
    bool spatially_smooth = true;  // false for piecewise-constant-in-x laws
    std::string name = "constant";
};

/// Seebeck coefficient law alpha(x, T) with its T-derivative, a declared value
/// band [band_lo, band_hi], a cap mu_cap on |d alpha/dT| (the cap tightens to
/// mu_cap/|T| for |T| > 1), and a declared T-Lipschitz constant.
struct AlphaLaw {
    std::function<double(Vec2, double)> f;
    std::function<double(Vec2, double)> df;
    double band_lo = 0.0, band_hi = 0.0;
    double mu_cap = 0.0;     // 0 encodes a T-independent law
    double lipschitz = 0.0;  // Lipschitz constant in T, uniform in x
    bool depends_on_T = false;
    bool spatially_smooth = true;
    std::string name = "constant";
};

inline SigmaLaw sigma_constant(double value) {
    if (!(value > 0.0) || !std::isfinite(value))
        throw InvalidInput("sigma constant law needs a positive finite value");
    SigmaLaw law;
    law.f = [value](Vec2, double) { return value; };
    law.lo = law.hi = value;
    law.name = "constant";
    return law;
}

/// sigma(T) = lo + (hi - lo) * (1 + tanh T) / 2, smooth and strictly inside (lo, hi).
inline SigmaLaw sigma_tanh(double lo, double hi) {
    if (!(0.0 < lo && lo < hi)) throw InvalidInput("sigma tanh law needs 0 < lo < hi");
    SigmaLaw law;
    law.f = [lo, hi](Vec2, double T) { return lo + (hi - lo) * 0.5 * (1.0 + std::tanh(T)); };
    law.lo = lo;
    law.hi = hi;
    law.depends_on_T = true;
    law.name = "tanh";
    return law;
}

/// T-independent checkerboard over `cells` x `cells` square cells: `lo` on
/// cells whose index sum is even, `hi` otherwise.
inline SigmaLaw sigma_checkerboard(double lo, double hi, int cells) {
    if (!(0.0 < lo && lo <= hi)) throw InvalidInput("sigma checkerboard law needs 0 < lo <= hi");
    if (cells < 1) throw InvalidInput("sigma checkerboard law needs cells >= 1");
    SigmaLaw law;
    law.f = [lo, hi, cells](Vec2 x, double) {
        auto cell = [cells](double c) {
            int i = static_cast<int>(std::floor(c * cells));
            return std::min(std::max(i, 0), cells - 1);
        };
        return (cell(x.x) + cell(x.y)) % 2 == 0 ? lo : hi;
    };
    law.lo = lo;
    law.hi = hi;
    law.spatially_smooth = false;
    law.name = "checkerboard";
    return law;
}

inline AlphaLaw alpha_constant(double value) {
    if (value == 0.0 || !std::isfinite(value))
        throw InvalidInput("alpha constant law needs a nonzero finite value");
    AlphaLaw law;
    law.f = [value](Vec2, double) { return value; };
    law.df = [](Vec2, double) { return 0.0; };
    law.band_lo = law.band_hi = value;
    law.name = "constant";
    return law;
}

/// alpha(T) = c0 + c1 * atan(T); the derivative c1/(1+T^2) meets the |T|>1
/// envelope with cap |c1| because 1 + T^2 >= |T|.
inline AlphaLaw alpha_arctan(double c0, double c1) {
    if (!std::isfinite(c0) || !std::isfinite(c1)) throw InvalidInput("alpha arctan law: bad coefficients");
    AlphaLaw law;
    law.f = [c0, c1](Vec2, double T) { return c0 + c1 * std::atan(T); };
    law.df = [c1](Vec2, double T) { return c1 / (1.0 + T * T); };
    law.band_lo = c0 - std::abs(c1) * M_PI_2;
    law.band_hi = c0 + std::abs(c1) * M_PI_2;
    law.mu_cap = std::abs(c1);
    law.lipschitz = std::abs(c1);
    law.depends_on_T = true;
    law.name = "arctan";
    return law;
}

/// alpha(T) = c0 + c1 / (1 + T^2), an even bump with its extremum at T = 0.
/// |d alpha/dT| peaks at T = 1/sqrt(3) with value 9|c1|/(8 sqrt(3)).
inline AlphaLaw alpha_rational(double c0, double c1) {
    if (!std::isfinite(c0) || c1 == 0.0 || !std::isfinite(c1))
        throw InvalidInput("alpha rational law: bad coefficients");
    AlphaLaw law;
    law.f = [c0, c1](Vec2, double T) { return c0 + c1 / (1.0 + T * T); };
    law.df = [c1](Vec2, double T) {
        double d = 1.0 + T * T;
        return -2.0 * c1 * T / (d * d);
    };
    law.band_lo = std::min(c0, c0 + c1);
    law.band_hi = std::max(c0, c0 + c1);
    law.mu_cap = 9.0 * std::abs(c1) / (8.0 * std::sqrt(3.0));
    law.lipschitz = law.mu_cap;
    law.depends_on_T = true;
    law.name = "rational";
    return law;
}

/// T-independent step in x: `left_value` for x <= split, `right_value` beyond.
/// The x-dependence keeps the boundary integral of alpha*h from collapsing to
/// zero for compatible h, which the scalar limit equation needs.
inline AlphaLaw alpha_xstep(double left_value, double right_value, double split) {
    if (!std::isfinite(left_value) || !std::isfinite(right_value) || !std::isfinite(split))
        throw InvalidInput("alpha xstep law: bad parameters");
    AlphaLaw law;
    law.f = [left_value, right_value, split](Vec2 x, double) {
        return x.x <= split ? left_value : right_value;
    };
    law.df = [](Vec2, double) { return 0.0; };
    law.band_lo = std::min(left_value, right_value);
    law.band_hi = std::max(left_value, right_value);
    law.spatially_smooth = false;
    law.name = "xstep";
    return law;
}

/// Immutable coefficient model. Evaluation is pure apart from the shared
/// clamp counters (atomic, safe under concurrent evaluation).
struct CoefficientModel {
    SigmaLaw sigma;
    AlphaLaw alpha;
    SignCase sign_case = SignCase::Positive;
    std::shared_ptr<ClampCounters> clamps = std::make_shared<ClampCounters>();

    double sigma_lo() const { return sigma.lo; }
    double sigma_hi() const { return sigma.hi; }
    /// alpha_floor/alpha_cap are the magnitude bounds of the declared band.
    double alpha_floor() const { return std::min(std::abs(alpha.band_lo), std::abs(alpha.band_hi)); }
    double alpha_cap() const { return std::max(std::abs(alpha.band_lo), std::abs(alpha.band_hi)); }
};

inline CoefficientModel make_model(SigmaLaw sigma, AlphaLaw alpha,
                                   SignCase sign_case = SignCase::Positive) {
    CoefficientModel m;
    m.sigma = std::move(sigma);
    m.alpha = std::move(alpha);
    m.sign_case = sign_case;
    return m;
}

/// Conductivity clamped into its declared band; excursions are counted, not fatal.
inline double eval_sigma(const CoefficientModel& m, Vec2 x, double T) {
    double v = m.sigma.f(x, T);
    if (v < m.sigma.lo || v > m.sigma.hi) {
        m.clamps->sigma.fetch_add(1, std::memory_order_relaxed);
        v = std::min(std::max(v, m.sigma.lo), m.sigma.hi);
    }
    return v;
}

/// Seebeck coefficient clamped into the declared band.
inline double eval_alpha(const CoefficientModel& m, Vec2 x, double T) {
    double v = m.alpha.f(x, T);
    if (v < m.alpha.band_lo || v > m.alpha.band_hi) {
        m.clamps->alpha.fetch_add(1, std::memory_order_relaxed);
        v = std::min(std::max(v, m.alpha.band_lo), m.alpha.band_hi);
    }
    return v;
}

/// d alpha / dT clamped into the envelope +-mu_cap/max(1, |T|).
inline double eval_dalpha(const CoefficientModel& m, Vec2 x, double T) {
    double cap = m.alpha.mu_cap / std::max(1.0, std::abs(T));
    double v = m.alpha.df(x, T);
    if (v < -cap || v > cap) {
        m.clamps->dalpha.fetch_add(1, std::memory_order_relaxed);
        v = std::min(std::max(v, -cap), cap);
    }
    return v;
}

/// Right-hand data of one problem instance. `h` is the prescribed normal
/// current density, one value per boundary edge of the mesh it was built for.
struct ProblemData {
    double k = 1.0;                           // thermal conductivity
    std::function<double(Vec2)> g;            // volumetric heat source
    std::vector<double> h;                    // per boundary edge, mesh order
    double h_bound_gamma = 0.0;               // declared level of |h| on Gamma (positive)
    double h_bound_sigma = 0.0;               // declared signed floor of h on Sigma (negative)
    double c1_estimate = 0.0;                 // trace-constant surrogate; 0 = not estimated
    std::vector<double> boundary_correction;  // optional extra boundary load, per edge
};

inline ProblemData make_problem_data(const TriMesh& mesh, double k,
                                     std::function<double(Vec2)> g,
                                     std::function<double(Vec2, BoundaryTag)> h_of,
                                     double h_bound_gamma, double h_bound_sigma,
                                     double c1_estimate = 0.0) {
    ProblemData data;
    data.k = k;
    data.g = std::move(g);
    data.h.resize(static_cast<size_t>(mesh.num_edges()));
    for (int e = 0; e < mesh.num_edges(); ++e)
        data.h[static_cast<size_t>(e)] =
            h_of(mesh.edge_midpoint(e), mesh.edge[static_cast<size_t>(e)].tag);
    data.h_bound_gamma = h_bound_gamma;
    data.h_bound_sigma = h_bound_sigma;
    data.c1_estimate = c1_estimate;
    return data;
}

/// Net prescribed current through the boundary (must vanish for solvability).
inline double boundary_flux_total(const TriMesh& mesh, const ProblemData& data) {
    double sum = 0.0;
    for (int e = 0; e < mesh.num_edges(); ++e)
        sum += data.h[static_cast<size_t>(e)] * mesh.edge_length(e);
    return sum;
}

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string witness;  // human-readable sample or value that decided the check
};

struct ValidationReport {
    std::vector<CheckResult> checks;
    /// Sufficient-coercivity margin h_sigma_bound + min(k, alpha_floor*h_gamma_bound)
    /// / (C1 * alpha_cap) > 0. Advisory: the compatibility condition forces the
    /// declared floor on Sigma below this threshold for every admissible datum,
    /// so solvers rely on the attempt-and-fallback policy instead. Reported for
    /// transparency, excluded from all_passed().
    CheckResult coercivity_margin;
    double coercivity_margin_value = 0.0;

    bool all_passed() const {
        for (const auto& c : checks)
            if (!c.passed) return false;
        return true;
    }
};

namespace detail {

inline std::string fmt_g(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace detail

/// Deterministic sampling audit of every declared model/data invariant.
/// Samples sigma/alpha at all triangle centroids and boundary-edge midpoints,
/// for T on a uniform grid over [-10, 10] (t_samples points) plus the four
/// near-unit values +-1 +- 1e-6 where the derivative envelope switches form.
inline ValidationReport validate_hypotheses(const CoefficientModel& model,
                                            const ProblemData& data, const TriMesh& mesh,
                                            int t_samples = 21) {
    ValidationReport report;
    auto add = [&](const std::string& name, bool ok, const std::string& witness) {
        report.checks.push_back({name, ok, witness});
    };

    std::vector<Vec2> points;
    for (int t = 0; t < mesh.num_triangles(); ++t) points.push_back(mesh.centroid(t));
    for (int e = 0; e < mesh.num_edges(); ++e) points.push_back(mesh.edge_midpoint(e));

    std::vector<double> temps;
    for (int i = 0; i < t_samples; ++i)
        temps.push_back(-10.0 + 20.0 * i / static_cast<double>(t_samples - 1));
    for (double t : {-1.0 - 1e-6, -1.0 + 1e-6, 1.0 - 1e-6, 1.0 + 1e-6}) temps.push_back(t);

    // (sigma) measurable, bounded between positive constants.
    {
        bool ok = model.sigma_lo() > 0.0 && model.sigma_lo() <= model.sigma_hi();
        std::string witness = "bounds [" + detail::fmt_g(model.sigma_lo()) + ", " +
                              detail::fmt_g(model.sigma_hi()) + "]";
        const double slack = 1e-12 * std::max(1.0, model.sigma_hi());
        for (const auto& p : points) {
            if (!ok) break;
            for (double T : temps) {
                double v = model.sigma.f(p, T);
                if (!std::isfinite(v) || v < model.sigma_lo() - slack ||
                    v > model.sigma_hi() + slack) {
                    ok = false;
                    witness = "sigma(" + detail::fmt_g(p.x) + "," + detail::fmt_g(p.y) +
                              "; T=" + detail::fmt_g(T) + ") = " + detail::fmt_g(v) +
                              " leaves the declared band";
                    break;
                }
            }
        }
        add("sigma-bounds", ok, witness);
    }

    // (alpha) band containment plus the sign structure of the declared band.
    {
        bool sign_ok = model.sign_case == SignCase::Positive ? model.alpha.band_lo > 0.0
                                                             : model.alpha.band_hi < 0.0;
        bool ok = sign_ok;
        std::string witness =
            sign_ok ? "band [" + detail::fmt_g(model.alpha.band_lo) + ", " +
                          detail::fmt_g(model.alpha.band_hi) + "] matches the sign case"
                    : "declared band [" + detail::fmt_g(model.alpha.band_lo) + ", " +
                          detail::fmt_g(model.alpha.band_hi) + "] violates the sign case";
        const double slack = 1e-12 * std::max(1.0, model.alpha_cap());
        for (const auto& p : points) {
            if (!ok) break;
            for (double T : temps) {
                double v = model.alpha.f(p, T);
                if (!std::isfinite(v) || v < model.alpha.band_lo - slack ||
                    v > model.alpha.band_hi + slack) {
                    ok = false;
                    witness = "alpha(" + detail::fmt_g(p.x) + "," + detail::fmt_g(p.y) +
                              "; T=" + detail::fmt_g(T) + ") = " + detail::fmt_g(v) +
                              " leaves the declared band";
                    break;
                }
            }
        }
        add("alpha-band", ok, witness);
    }

    // (alpha) derivative envelope |da/dT| <= mu_cap / max(1, |T|).
    {
        bool ok = model.alpha.mu_cap >= 0.0;
        std::string witness = "mu_cap = " + detail::fmt_g(model.alpha.mu_cap);
        const double slack = 1e-12 * std::max(1.0, model.alpha.mu_cap);
        for (const auto& p : points) {
            if (!ok) break;
            for (double T : temps) {
                double cap = model.alpha.mu_cap / std::max(1.0, std::abs(T));
                double v = model.alpha.df(p, T);
                if (!std::isfinite(v) || std::abs(v) > cap + slack) {
                    ok = false;
                    witness = "dalpha(T=" + detail::fmt_g(T) + ") = " + detail::fmt_g(v) +
                              " exceeds the envelope " + detail::fmt_g(cap);
                    break;
                }
            }
        }
        add("alpha-derivative-envelope", ok, witness);
    }

    // (alpha) declared Lipschitz constant vs sampled difference quotients.
    {
        double worst = 0.0;
        for (const auto& p : points) {
            for (size_t i = 0; i + 1 < temps.size(); ++i) {
                double dT = temps[i + 1] - temps[i];
                if (std::abs(dT) < 1e-14) continue;
                double q = std::abs(model.alpha.f(p, temps[i + 1]) - model.alpha.f(p, temps[i])) /
                           std::abs(dT);
                worst = std::max(worst, q);
            }
        }
        bool ok = worst <= model.alpha.lipschitz * (1.0 + 1e-9) + 1e-15;
        add("alpha-lipschitz", ok,
            "largest sampled difference quotient " + detail::fmt_g(worst) + " vs declared " +
                detail::fmt_g(model.alpha.lipschitz));
    }

    // (data) thermal conductivity and heat source.
    add("k-positive", std::isfinite(data.k) && data.k > 0.0, "k = " + detail::fmt_g(data.k));
    {
        bool ok = static_cast<bool>(data.g);
        std::string witness = ok ? "finite at all centroids" : "g is not set";
        if (ok)
            for (int t = 0; t < mesh.num_triangles(); ++t) {
                double v = data.g(mesh.centroid(t));
                if (!std::isfinite(v)) {
                    ok = false;
                    witness = "g at centroid of triangle " + std::to_string(t) + " is not finite";
                    break;
                }
            }
        add("g-finite", ok, witness);
    }

    // (data) zero net current through the boundary.
    {
        bool sized = data.h.size() == static_cast<size_t>(mesh.num_edges());
        double total = sized ? boundary_flux_total(mesh, data) : 0.0;
        double scale = 1.0;
        if (sized)
            for (int e = 0; e < mesh.num_edges(); ++e)
                scale += std::abs(data.h[static_cast<size_t>(e)]) * mesh.edge_length(e);
        bool ok = sized && std::abs(total) <= 1e-10 * scale;
        add("flux-compatibility", ok,
            sized ? "net boundary current " + detail::fmt_g(total)
                  : "h has " + std::to_string(data.h.size()) + " entries for " +
                        std::to_string(mesh.num_edges()) + " edges");
    }

    // (data) sign structure of h relative to the declared levels.
    if (data.h.size() == static_cast<size_t>(mesh.num_edges())) {
        const bool positive = model.sign_case == SignCase::Positive;
        bool gamma_ok = data.h_bound_gamma > 0.0;
        bool sigma_ok = data.h_bound_sigma < 0.0;
        std::string gw = "declared level " + detail::fmt_g(data.h_bound_gamma);
        std::string sw = "declared floor " + detail::fmt_g(data.h_bound_sigma);
        const double tiny = 1e-12 * std::max(1.0, std::abs(data.h_bound_gamma));
        for (int e = 0; e < mesh.num_edges(); ++e) {
            double he = data.h[static_cast<size_t>(e)];
            bool on_gamma = mesh.edge[static_cast<size_t>(e)].tag == BoundaryTag::Gamma;
            bool ok_here = on_gamma
                               ? (positive ? he >= data.h_bound_gamma - tiny
                                           : he <= -data.h_bound_gamma + tiny)
                               : (positive ? he >= data.h_bound_sigma - tiny
                                           : he <= -data.h_bound_sigma + tiny);
            if (!ok_here) {
                std::string msg = "h = " + detail::fmt_g(he) + " on edge " + std::to_string(e) +
                                  " violates the declared level";
                if (on_gamma) {
                    gamma_ok = false;
                    gw = msg;
                } else {
                    sigma_ok = false;
                    sw = msg;
                }
            }
        }
        add("h-level-gamma", gamma_ok, gw);
        add("h-level-sigma", sigma_ok, sw);
    }

    // Advisory coercivity margin (see ledger note in the report struct).
    {
        double c1 = data.c1_estimate;
        double margin = 0.0;
        bool ok = false;
        std::string witness;
        if (c1 > 0.0 && model.alpha_cap() > 0.0) {
            margin = data.h_bound_sigma +
                     std::min(data.k, model.alpha_floor() * data.h_bound_gamma) /
                         (c1 * model.alpha_cap());
            ok = margin > 0.0;
            witness = "margin " + detail::fmt_g(margin) + " with C1 = " + detail::fmt_g(c1);
        } else {
            witness = "no trace-constant estimate available";
        }
        report.coercivity_margin = {"coercivity-margin(advisory)", ok, witness};
        report.coercivity_margin_value = margin;
    }

    return report;
}

} // namespace thermoshadow
