#pragma once

#include "coefficients.hpp"
#include "fem.hpp"

namespace thermoshadow {

struct LinearSettings {
    double tol = 1e-12;
    int max_iterations = 20000;
    bool allow_dense_fallback = true;
};

namespace detail {

/// Iterative first; an indefinite or stalled Robin system falls back to the
/// guarded dense factorization when permitted.
inline std::vector<double> solve_with_fallback(const SparseSystem& sys, const LinearSettings& s,
                                               SolveStats* stats) {
    try {
        return solve_spd(sys, s.tol, s.max_iterations, stats);
    } catch (const SolveError& e) {
        if (!s.allow_dense_fallback) throw;
        if (e.kind == SolveError::Kind::Indefinite || e.kind == SolveError::Kind::MaxIterations)
            return solve_dense(sys, stats);
        throw;
    }
}

inline double field_at_centroid(const TriMesh& mesh, const ScalarField& u, int t) {
    const auto& v = mesh.tri[static_cast<size_t>(t)];
    return (u[v[0]] + u[v[1]] + u[v[2]]) / 3.0;
}

inline double field_at_edge_mid(const ScalarField& u, const BoundaryEdge& e) {
    return 0.5 * (u[e.a] + u[e.b]);
}

} // namespace detail

/// Electric-potential system at a frozen temperature iterate xi:
///   div(sigma(x, xi) grad(phi)) = -div(sigma alpha grad(xi)),
/// natural flux data h on the whole boundary, mean of the boundary trace
/// pinned to zero. The matrix kernel is the constants, hence the constraint.
inline SparseSystem build_potential_system(const TriMesh& mesh, const CoefficientModel& model,
                                           const ProblemData& data, const ScalarField& xi) {
    TripletList trip_s(mesh.num_vertices()), trip_sa(mesh.num_vertices());
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const auto& v = mesh.tri[static_cast<size_t>(t)];
        double area = mesh.tri_area(t);
        Vec2 c = mesh.centroid(t);
        double temp = detail::field_at_centroid(mesh, xi, t);
        double sg = eval_sigma(model, c, temp);
        double al = eval_alpha(model, c, temp);
        auto grad = detail::basis_gradients(mesh, t, area);
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b) {
                double gg = area * dot(grad[static_cast<size_t>(a)], grad[static_cast<size_t>(b)]);
                trip_s.add(v[static_cast<size_t>(a)], v[static_cast<size_t>(b)], sg * gg);
                trip_sa.add(v[static_cast<size_t>(a)], v[static_cast<size_t>(b)], sg * al * gg);
            }
    }
    CsrMatrix A = trip_s.compressed();
    CsrMatrix K_sa = trip_sa.compressed();

    std::vector<double> rhs = assemble_boundary_load(mesh, data.h);
    std::vector<double> seebeck;
    K_sa.mul(xi.v, seebeck);
    for (size_t i = 0; i < rhs.size(); ++i) rhs[i] -= seebeck[i];

    return SparseSystem{std::move(A), std::move(rhs),
                        LinearConstraint{boundary_trace_weights(mesh), 0.0}};
}

inline ScalarField solve_potential(const TriMesh& mesh, const CoefficientModel& model,
                                   const ProblemData& data, const ScalarField& xi,
                                   const LinearSettings& settings = {}, SolveStats* stats = nullptr) {
    SparseSystem sys = build_potential_system(mesh, model, data, xi);
    return ScalarField(mesh, detail::solve_with_fallback(sys, settings, stats));
}

/// Per-triangle heat release and current density of the electro-thermal
/// coupling at a frozen pair (xi, phi). With a = grad(xi), b = grad(phi),
/// T the centroid temperature, and dT the temperature slope of the
/// thermoelectric coefficient:
///   F = sigma * ( alpha*(alpha + dT*T)*|a|^2 + (2*alpha + dT*T)*(a.b) + |b|^2 )
///   j = -sigma * (alpha*a + b)
/// When the coefficient has no temperature dependence, sigma*F = |j|^2.
struct JouleField {
    std::vector<double> volumetric;  // per triangle
    std::vector<Vec2> current;       // per triangle
};

inline JouleField joule_source(const TriMesh& mesh, const CoefficientModel& model,
                               const ScalarField& xi, const ScalarField& phi) {
    JouleField out;
    out.volumetric.resize(static_cast<size_t>(mesh.num_triangles()));
    out.current.resize(static_cast<size_t>(mesh.num_triangles()));
    auto ga = elem_gradients(xi);
    auto gb = elem_gradients(phi);
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        Vec2 c = mesh.centroid(t);
        double temp = detail::field_at_centroid(mesh, xi, t);
        double sg = eval_sigma(model, c, temp);
        double al = eval_alpha(model, c, temp);
        double dal = eval_dalpha(model, c, temp);
        Vec2 a = ga[static_cast<size_t>(t)], b = gb[static_cast<size_t>(t)];
        out.volumetric[static_cast<size_t>(t)] =
            sg * (al * (al + dal * temp) * dot(a, a) + (2.0 * al + dal * temp) * dot(a, b) +
                  dot(b, b));
        out.current[static_cast<size_t>(t)] = -sg * (al * a + b);
    }
    return out;
}

/// Temperature system at frozen xi with a prescribed per-triangle heat source:
///   k * stiffness + Robin boundary mass with weight alpha(x, xi) * h,
///   load = heat source + volumetric supply g (+ optional extra boundary data).
/// The Robin weight can be sign-indefinite, so callers should allow the dense
/// fallback unless they know the data keeps the form definite.
inline SparseSystem build_temperature_system(const TriMesh& mesh, const CoefficientModel& model,
                                             const ProblemData& data, const ScalarField& xi,
                                             const std::vector<double>& heat_per_triangle,
                                             const std::vector<double>* extra_boundary = nullptr) {
    double h_scale = 0.0;
    for (double h : data.h) h_scale = std::max(h_scale, std::abs(h));
    if (h_scale == 0.0)
        throw InvalidInput(
            "boundary exchange data h is identically zero: the temperature operator loses its "
            "only boundary term and becomes singular");

    CsrMatrix K = assemble_stiffness(mesh, [](Vec2) { return 1.0; });
    for (double& v : K.val) v *= data.k;

    std::vector<double> robin(static_cast<size_t>(mesh.num_edges()));
    for (int e = 0; e < mesh.num_edges(); ++e) {
        const auto& s = mesh.edge[static_cast<size_t>(e)];
        double temp = detail::field_at_edge_mid(xi, s);
        robin[static_cast<size_t>(e)] =
            eval_alpha(model, mesh.edge_midpoint(e), temp) * data.h[static_cast<size_t>(e)];
    }
    CsrMatrix B = assemble_boundary_mass(mesh, robin);

    TripletList trip(K.n);
    for (int i = 0; i < K.n; ++i)
        for (int k = K.row_ptr[static_cast<size_t>(i)]; k < K.row_ptr[static_cast<size_t>(i) + 1]; ++k)
            trip.add(i, K.col[static_cast<size_t>(k)], K.val[static_cast<size_t>(k)]);
    for (int i = 0; i < B.n; ++i)
        for (int k = B.row_ptr[static_cast<size_t>(i)]; k < B.row_ptr[static_cast<size_t>(i) + 1]; ++k)
            trip.add(i, B.col[static_cast<size_t>(k)], B.val[static_cast<size_t>(k)]);

    std::vector<double> rhs = assemble_volume_load(mesh, heat_per_triangle);
    std::vector<double> g_load = assemble_volume_load(mesh, data.g);
    for (size_t i = 0; i < rhs.size(); ++i) rhs[i] += g_load[i];
    if (!data.boundary_correction.empty()) {
        std::vector<double> extra = assemble_boundary_load(mesh, data.boundary_correction);
        for (size_t i = 0; i < rhs.size(); ++i) rhs[i] += extra[i];
    }
    if (extra_boundary) {
        std::vector<double> extra = assemble_boundary_load(mesh, *extra_boundary);
        for (size_t i = 0; i < rhs.size(); ++i) rhs[i] += extra[i];
    }
    return SparseSystem{trip.compressed(), std::move(rhs), std::nullopt};
}

inline ScalarField solve_temperature(const TriMesh& mesh, const CoefficientModel& model,
                                     const ProblemData& data, const ScalarField& xi,
                                     const ScalarField& phi, const LinearSettings& settings = {},
                                     SolveStats* stats = nullptr) {
    JouleField joule = joule_source(mesh, model, xi, phi);
    SparseSystem sys = build_temperature_system(mesh, model, data, xi, joule.volumetric);
    return ScalarField(mesh, detail::solve_with_fallback(sys, settings, stats));
}

/// Temperature solve with caller-supplied heat source and boundary correction,
/// used by manufactured-solution studies.
inline ScalarField solve_temperature_with_sources(const TriMesh& mesh, const CoefficientModel& model,
                                                  const ProblemData& data, const ScalarField& xi,
                                                  const std::vector<double>& heat_per_triangle,
                                                  const std::vector<double>& extra_boundary,
                                                  const LinearSettings& settings = {},
                                                  SolveStats* stats = nullptr) {
    SparseSystem sys =
        build_temperature_system(mesh, model, data, xi, heat_per_triangle, &extra_boundary);
    return ScalarField(mesh, detail::solve_with_fallback(sys, settings, stats));
}

} // namespace thermoshadow
