#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mesh.hpp"

namespace thermoshadow {

/// Piecewise-linear nodal field over a triangulation.
struct ScalarField {
    const TriMesh* mesh = nullptr;
    std::vector<double> v;

    ScalarField() = default;
    explicit ScalarField(const TriMesh& m, double fill = 0.0)
        : mesh(&m), v(static_cast<size_t>(m.num_vertices()), fill) {
        if (!std::isfinite(fill)) throw InvalidInput("field fill value is not finite");
    }
    ScalarField(const TriMesh& m, std::vector<double> values) : mesh(&m), v(std::move(values)) {
        if (v.size() != static_cast<size_t>(m.num_vertices()))
            throw InvalidInput("field has " + std::to_string(v.size()) + " values for " +
                               std::to_string(m.num_vertices()) + " vertices");
        for (double x : v)
            if (!std::isfinite(x)) throw InvalidInput("field contains a non-finite value");
    }

    double& operator[](int i) { return v[static_cast<size_t>(i)]; }
    double operator[](int i) const { return v[static_cast<size_t>(i)]; }
    int size() const { return static_cast<int>(v.size()); }
};

/// Compressed sparse rows, square and structurally symmetric.
struct CsrMatrix {
    int n = 0;
    std::vector<int> row_ptr, col;
    std::vector<double> val;

    void mul(const std::vector<double>& x, std::vector<double>& y) const {
        y.assign(static_cast<size_t>(n), 0.0);
        for (int i = 0; i < n; ++i) {
            double s = 0.0;
            for (int k = row_ptr[static_cast<size_t>(i)]; k < row_ptr[static_cast<size_t>(i) + 1]; ++k)
                s += val[static_cast<size_t>(k)] * x[static_cast<size_t>(col[static_cast<size_t>(k)])];
            y[static_cast<size_t>(i)] = s;
        }
    }

    /// x' A y
    double quad(const std::vector<double>& x, const std::vector<double>& y) const {
        double s = 0.0;
        for (int i = 0; i < n; ++i) {
            double row = 0.0;
            for (int k = row_ptr[static_cast<size_t>(i)]; k < row_ptr[static_cast<size_t>(i) + 1]; ++k)
                row += val[static_cast<size_t>(k)] * y[static_cast<size_t>(col[static_cast<size_t>(k)])];
            s += x[static_cast<size_t>(i)] * row;
        }
        return s;
    }

    std::vector<double> diagonal() const {
        std::vector<double> d(static_cast<size_t>(n), 0.0);
        for (int i = 0; i < n; ++i)
            for (int k = row_ptr[static_cast<size_t>(i)]; k < row_ptr[static_cast<size_t>(i) + 1]; ++k)
                if (col[static_cast<size_t>(k)] == i) d[static_cast<size_t>(i)] = val[static_cast<size_t>(k)];
        return d;
    }

    /// Largest |A_ij - A_ji| relative to the largest entry magnitude.
    double symmetry_defect() const {
        double max_abs = 0.0;
        for (double v : val) max_abs = std::max(max_abs, std::abs(v));
        if (max_abs == 0.0) return 0.0;
        double worst = 0.0;
        for (int i = 0; i < n; ++i) {
            for (int k = row_ptr[static_cast<size_t>(i)]; k < row_ptr[static_cast<size_t>(i) + 1]; ++k) {
                int j = col[static_cast<size_t>(k)];
                if (j < i) continue;
                double aij = val[static_cast<size_t>(k)];
                double aji = 0.0;
                for (int m = row_ptr[static_cast<size_t>(j)]; m < row_ptr[static_cast<size_t>(j) + 1]; ++m)
                    if (col[static_cast<size_t>(m)] == i) aji = val[static_cast<size_t>(m)];
                worst = std::max(worst, std::abs(aij - aji));
            }
        }
        return worst / max_abs;
    }

    /// Coordinate-format export for external inspection.
    void write_matrix_market(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw Error("cannot open '" + path + "' for writing");
        out << "%%MatrixMarket matrix coordinate real general\n";
        out << n << " " << n << " " << val.size() << "\n";
        char buf[64];
        for (int i = 0; i < n; ++i)
            for (int k = row_ptr[static_cast<size_t>(i)]; k < row_ptr[static_cast<size_t>(i) + 1]; ++k) {
                out << (i + 1) << " " << (col[static_cast<size_t>(k)] + 1) << " ";
                std::snprintf(buf, sizeof buf, "%.17g\n", val[static_cast<size_t>(k)]);
                out << buf;
            }
    }
};

/// Accumulates (i, j, value) contributions, then compresses duplicates.
struct TripletList {
    int n = 0;
    std::vector<int> i, j;
    std::vector<double> v;

    explicit TripletList(int size) : n(size) {}
    void add(int row, int column, double value) {
        i.push_back(row);
        j.push_back(column);
        v.push_back(value);
    }

    CsrMatrix compressed() const {
        std::vector<size_t> order(i.size());
        for (size_t k = 0; k < order.size(); ++k) order[k] = k;
        std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
            return i[a] != i[b] ? i[a] < i[b] : j[a] < j[b];
        });
        CsrMatrix m;
        m.n = n;
        m.row_ptr.assign(static_cast<size_t>(n) + 1, 0);
        for (size_t k = 0; k < order.size(); ++k) {
            size_t idx = order[k];
            if (!m.col.empty() && !m.row_ptr.empty() && k > 0) {
                size_t prev = order[k - 1];
                if (i[prev] == i[idx] && j[prev] == j[idx]) {
                    m.val.back() += v[idx];
                    continue;
                }
            }
            m.col.push_back(j[idx]);
            m.val.push_back(v[idx]);
            ++m.row_ptr[static_cast<size_t>(i[idx]) + 1];
        }
        for (int r = 0; r < n; ++r)
            m.row_ptr[static_cast<size_t>(r) + 1] += m.row_ptr[static_cast<size_t>(r)];
        return m;
    }
};

/// Single linear constraint w . x = c used to pin the additive constant of a
/// pure-flux (all-natural-boundary) system whose matrix kernel is the constants.
struct LinearConstraint {
    std::vector<double> w;
    double c = 0.0;
};

struct SparseSystem {
    CsrMatrix A;
    std::vector<double> b;
    std::optional<LinearConstraint> constraint;
};

namespace detail {

inline std::array<Vec2, 3> basis_gradients(const TriMesh& mesh, int t, double area) {
    const auto& v = mesh.tri[static_cast<size_t>(t)];
    std::array<Vec2, 3> grad{};
    for (int k = 0; k < 3; ++k) {
        Vec2 e = mesh.vertex[v[static_cast<size_t>((k + 2) % 3)]] -
                 mesh.vertex[v[static_cast<size_t>((k + 1) % 3)]];
        grad[static_cast<size_t>(k)] = {-e.y / (2.0 * area), e.x / (2.0 * area)};
    }
    return grad;
}

} // namespace detail

/// Stiffness matrix with the coefficient sampled at triangle centroids:
/// A_ij = sum_T coeff(centroid) * area * grad(phi_i) . grad(phi_j).
inline CsrMatrix assemble_stiffness(const TriMesh& mesh,
                                    const std::function<double(Vec2)>& coeff_at) {
    TripletList trip(mesh.num_vertices());
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const auto& v = mesh.tri[static_cast<size_t>(t)];
        double area = mesh.tri_area(t);
        double c = coeff_at(mesh.centroid(t));
        auto grad = detail::basis_gradients(mesh, t, area);
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b)
                trip.add(v[static_cast<size_t>(a)], v[static_cast<size_t>(b)],
                         c * area * dot(grad[static_cast<size_t>(a)], grad[static_cast<size_t>(b)]));
    }
    return trip.compressed();
}

/// Exact P1 mass matrix (area/12 off-diagonal, area/6 diagonal per element).
inline CsrMatrix assemble_mass(const TriMesh& mesh) {
    TripletList trip(mesh.num_vertices());
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const auto& v = mesh.tri[static_cast<size_t>(t)];
        double area = mesh.tri_area(t);
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b)
                trip.add(v[static_cast<size_t>(a)], v[static_cast<size_t>(b)],
                         area * (a == b ? 1.0 / 6.0 : 1.0 / 12.0));
    }
    return trip.compressed();
}

/// Boundary mass with one weight per edge, exact for P1 traces:
/// each edge contributes weight * length * [[1/3, 1/6], [1/6, 1/3]].
inline CsrMatrix assemble_boundary_mass(const TriMesh& mesh,
                                        const std::vector<double>& edge_weight) {
    if (edge_weight.size() != static_cast<size_t>(mesh.num_edges()))
        throw InvalidInput("boundary mass: one weight per boundary edge required");
    TripletList trip(mesh.num_vertices());
    for (int e = 0; e < mesh.num_edges(); ++e) {
        const auto& s = mesh.edge[static_cast<size_t>(e)];
        double wl = edge_weight[static_cast<size_t>(e)] * mesh.edge_length(e);
        trip.add(s.a, s.a, wl / 3.0);
        trip.add(s.b, s.b, wl / 3.0);
        trip.add(s.a, s.b, wl / 6.0);
        trip.add(s.b, s.a, wl / 6.0);
    }
    return trip.compressed();
}

/// Volume load by the three-edge-midpoint rule (exact through degree 2).
inline std::vector<double> assemble_volume_load(const TriMesh& mesh,
                                                const std::function<double(Vec2)>& f) {
    std::vector<double> load(static_cast<size_t>(mesh.num_vertices()), 0.0);
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const auto& v = mesh.tri[static_cast<size_t>(t)];
        double area = mesh.tri_area(t);
        Vec2 p0 = mesh.vertex[v[0]], p1 = mesh.vertex[v[1]], p2 = mesh.vertex[v[2]];
        double f01 = f(0.5 * (p0 + p1)), f12 = f(0.5 * (p1 + p2)), f20 = f(0.5 * (p2 + p0));
        // basis k equals 1/2 on its two adjacent midpoints, 0 on the opposite one
        load[static_cast<size_t>(v[0])] += area / 3.0 * 0.5 * (f01 + f20);
        load[static_cast<size_t>(v[1])] += area / 3.0 * 0.5 * (f01 + f12);
        load[static_cast<size_t>(v[2])] += area / 3.0 * 0.5 * (f12 + f20);
    }
    return load;
}

/// Volume load of a piecewise-constant (per-triangle) source: area/3 to each vertex.
inline std::vector<double> assemble_volume_load(const TriMesh& mesh,
                                                const std::vector<double>& per_triangle) {
    if (per_triangle.size() != static_cast<size_t>(mesh.num_triangles()))
        throw InvalidInput("volume load: one value per triangle required");
    std::vector<double> load(static_cast<size_t>(mesh.num_vertices()), 0.0);
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const auto& v = mesh.tri[static_cast<size_t>(t)];
        double w = per_triangle[static_cast<size_t>(t)] * mesh.tri_area(t) / 3.0;
        for (int k = 0; k < 3; ++k) load[static_cast<size_t>(v[static_cast<size_t>(k)])] += w;
    }
    return load;
}

/// Boundary load of a per-edge-constant density, exact for P1 test traces:
/// each endpoint receives value * length / 2.
inline std::vector<double> assemble_boundary_load(const TriMesh& mesh,
                                                  const std::vector<double>& edge_value) {
    if (edge_value.size() != static_cast<size_t>(mesh.num_edges()))
        throw InvalidInput("boundary load: one value per boundary edge required");
    std::vector<double> load(static_cast<size_t>(mesh.num_vertices()), 0.0);
    for (int e = 0; e < mesh.num_edges(); ++e) {
        const auto& s = mesh.edge[static_cast<size_t>(e)];
        double half = 0.5 * edge_value[static_cast<size_t>(e)] * mesh.edge_length(e);
        load[static_cast<size_t>(s.a)] += half;
        load[static_cast<size_t>(s.b)] += half;
    }
    return load;
}

/// Integral weights of the P1 trace on the whole boundary: w_i = sum of half
/// lengths of the incident boundary edges, so w . u = boundary integral of u.
inline std::vector<double> boundary_trace_weights(const TriMesh& mesh) {
    return assemble_boundary_load(mesh, std::vector<double>(static_cast<size_t>(mesh.num_edges()), 1.0));
}

/// Per-triangle gradient of a P1 field.
inline std::vector<Vec2> elem_gradients(const ScalarField& u) {
    const TriMesh& mesh = *u.mesh;
    std::vector<Vec2> g(static_cast<size_t>(mesh.num_triangles()));
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const auto& v = mesh.tri[static_cast<size_t>(t)];
        auto grad = detail::basis_gradients(mesh, t, mesh.tri_area(t));
        Vec2 s{0.0, 0.0};
        for (int k = 0; k < 3; ++k)
            s = s + u[v[static_cast<size_t>(k)]] * grad[static_cast<size_t>(k)];
        g[static_cast<size_t>(t)] = s;
    }
    return g;
}

struct FieldNorms {
    double l2 = 0.0;         // L2 over the domain
    double h1_semi = 0.0;    // L2 of the gradient
    double l2_gamma = 0.0;   // L2 over the Gamma part of the boundary
    double l2_sigma = 0.0;   // L2 over the Sigma part
    double l2_boundary = 0.0;
    double linf = 0.0;
};

/// All norms are quadrature-exact for P1 fields.
inline FieldNorms norms(const ScalarField& u) {
    const TriMesh& mesh = *u.mesh;
    FieldNorms out;
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const auto& v = mesh.tri[static_cast<size_t>(t)];
        double area = mesh.tri_area(t);
        double a = u[v[0]], b = u[v[1]], c = u[v[2]];
        // u' M_e u with the exact element mass matrix
        out.l2 += area / 6.0 * (a * a + b * b + c * c + a * b + b * c + c * a);
    }
    auto grads = elem_gradients(u);
    for (int t = 0; t < mesh.num_triangles(); ++t)
        out.h1_semi += mesh.tri_area(t) * dot(grads[static_cast<size_t>(t)], grads[static_cast<size_t>(t)]);
    for (int e = 0; e < mesh.num_edges(); ++e) {
        const auto& s = mesh.edge[static_cast<size_t>(e)];
        double va = u[s.a], vb = u[s.b];
        double part = mesh.edge_length(e) * (va * va + va * vb + vb * vb) / 3.0;
        out.l2_boundary += part;
        (s.tag == BoundaryTag::Gamma ? out.l2_gamma : out.l2_sigma) += part;
    }
    out.l2 = std::sqrt(std::max(out.l2, 0.0));
    out.h1_semi = std::sqrt(out.h1_semi);
    out.l2_gamma = std::sqrt(std::max(out.l2_gamma, 0.0));
    out.l2_sigma = std::sqrt(std::max(out.l2_sigma, 0.0));
    out.l2_boundary = std::sqrt(std::max(out.l2_boundary, 0.0));
    for (double x : u.v) out.linf = std::max(out.linf, std::abs(x));
    return out;
}

struct SolveStats {
    int iterations = 0;
    double residual = 0.0;  // relative to the right-hand side
    bool used_dense = false;
};

namespace detail {

inline double dot_vec(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm_vec(const std::vector<double>& a) { return std::sqrt(dot_vec(a, a)); }

inline void remove_mean(std::vector<double>& a) {
    double m = 0.0;
    for (double x : a) m += x;
    m /= static_cast<double>(a.size());
    for (double& x : a) x -= m;
}

/// Shift x along the constant kernel direction so that w . x = c exactly.
inline void apply_constraint_shift(std::vector<double>& x, const LinearConstraint& cons) {
    double w_sum = 0.0;
    for (double w : cons.w) w_sum += w;
    if (w_sum == 0.0)
        throw InvalidInput("constraint weights sum to zero; the constant shift is undefined");
    double shift = (cons.c - dot_vec(cons.w, x)) / w_sum;
    for (double& xi : x) xi += shift;
}

} // namespace detail

/// Conjugate gradients with Jacobi preconditioning. With a constraint the
/// matrix is taken to be singular with the constants as kernel: the right-hand
/// side and every preconditioned residual are projected onto the zero-mean
/// complement, and the finished solution is shifted so w . x = c holds exactly.
/// Throws SolveError(Indefinite) on a nonpositive curvature direction (the
/// caller may retry with solve_dense) and SolveError(MaxIterations) on stall;
/// both carry the relative residual history.
inline std::vector<double> solve_spd(const SparseSystem& sys, double tol = 1e-12,
                                     int max_iterations = 10000, SolveStats* stats = nullptr) {
    const CsrMatrix& A = sys.A;
    const int n = A.n;
    if (static_cast<int>(sys.b.size()) != n)
        throw InvalidInput("solve_spd: right-hand side size mismatch");
    if (sys.constraint && static_cast<int>(sys.constraint->w.size()) != n)
        throw InvalidInput("solve_spd: constraint weight size mismatch");

    const bool deflate = sys.constraint.has_value();
    std::vector<double> b = sys.b;
    if (deflate) detail::remove_mean(b);

    std::vector<double> x(static_cast<size_t>(n), 0.0);
    double b_norm = detail::norm_vec(b);
    std::vector<double> history;
    if (b_norm == 0.0) {
        if (sys.constraint) detail::apply_constraint_shift(x, *sys.constraint);
        if (stats) *stats = {0, 0.0, false};
        return x;
    }

    std::vector<double> diag = A.diagonal();
    double diag_scale = 0.0;
    for (double d : diag) diag_scale = std::max(diag_scale, std::abs(d));
    if (diag_scale == 0.0) throw SolveError(SolveError::Kind::Singular, "matrix diagonal is zero");
    for (double& d : diag)
        if (std::abs(d) < 1e-300) d = diag_scale;  // guard empty rows

    std::vector<double> r = b, z(static_cast<size_t>(n)), p, Ap(static_cast<size_t>(n));
    auto precondition = [&](const std::vector<double>& rin, std::vector<double>& zout) {
        for (int i = 0; i < n; ++i) zout[static_cast<size_t>(i)] = rin[static_cast<size_t>(i)] / diag[static_cast<size_t>(i)];
        if (deflate) detail::remove_mean(zout);
    };
    precondition(r, z);
    p = z;
    double rz = detail::dot_vec(r, z);

    for (int it = 0; it < max_iterations; ++it) {
        A.mul(p, Ap);
        double pAp = detail::dot_vec(p, Ap);
        if (pAp <= 0.0)
            throw SolveError(SolveError::Kind::Indefinite,
                             "nonpositive curvature encountered (p'Ap = " + std::to_string(pAp) +
                                 "); the system is not positive definite, use the dense path",
                             history);
        double alpha = rz / pAp;
        for (int i = 0; i < n; ++i) {
            x[static_cast<size_t>(i)] += alpha * p[static_cast<size_t>(i)];
            r[static_cast<size_t>(i)] -= alpha * Ap[static_cast<size_t>(i)];
        }
        double rel = detail::norm_vec(r) / b_norm;
        history.push_back(rel);
        if (rel <= tol) {
            if (sys.constraint) detail::apply_constraint_shift(x, *sys.constraint);
            if (stats) *stats = {it + 1, rel, false};
            return x;
        }
        precondition(r, z);
        double rz_next = detail::dot_vec(r, z);
        double beta = rz_next / rz;
        rz = rz_next;
        for (int i = 0; i < n; ++i)
            p[static_cast<size_t>(i)] = z[static_cast<size_t>(i)] + beta * p[static_cast<size_t>(i)];
    }
    throw SolveError(SolveError::Kind::MaxIterations,
                     "conjugate gradients did not reach tolerance " + std::to_string(tol) +
                         " in " + std::to_string(max_iterations) + " iterations",
                     history);
}

/// Dense LU with partial pivoting, guarded to modest sizes; the oracle path
/// and the fallback for indefinite Robin systems. A constrained (singular)
/// system is regularized by a rank-one term rho * w w', which leaves the
/// particular solution with w . x = 0 untouched; the constant shift then
/// enforces w . x = c exactly.
inline std::vector<double> solve_dense(const SparseSystem& sys, SolveStats* stats = nullptr) {
    const int n = sys.A.n;
    if (n > 4000)
        throw SolveError(SolveError::Kind::TooLarge,
                         "dense solve guarded to 4000 unknowns, got " + std::to_string(n));
    if (static_cast<int>(sys.b.size()) != n)
        throw InvalidInput("solve_dense: right-hand side size mismatch");

    std::vector<double> M(static_cast<size_t>(n) * static_cast<size_t>(n), 0.0);
    for (int i = 0; i < n; ++i)
        for (int k = sys.A.row_ptr[static_cast<size_t>(i)]; k < sys.A.row_ptr[static_cast<size_t>(i) + 1]; ++k)
            M[static_cast<size_t>(i) * static_cast<size_t>(n) +
              static_cast<size_t>(sys.A.col[static_cast<size_t>(k)])] += sys.A.val[static_cast<size_t>(k)];

    std::vector<double> b = sys.b;
    if (sys.constraint) {
        const auto& w = sys.constraint->w;
        if (static_cast<int>(w.size()) != n)
            throw InvalidInput("solve_dense: constraint weight size mismatch");
        detail::remove_mean(b);  // kernel-consistent right-hand side
        double ww = detail::dot_vec(w, w);
        if (ww == 0.0) throw InvalidInput("solve_dense: zero constraint weights");
        double scale = 0.0;
        for (int i = 0; i < n; ++i) scale += std::abs(M[static_cast<size_t>(i) * static_cast<size_t>(n) + static_cast<size_t>(i)]);
        scale = std::max(scale / n, 1e-300);
        double rho = scale / ww;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                M[static_cast<size_t>(i) * static_cast<size_t>(n) + static_cast<size_t>(j)] +=
                    rho * w[static_cast<size_t>(i)] * w[static_cast<size_t>(j)];
    }

    double max_abs = 0.0;
    for (double v : M) max_abs = std::max(max_abs, std::abs(v));
    if (max_abs == 0.0) throw SolveError(SolveError::Kind::Singular, "matrix is zero");

    // LU factorization with partial pivoting, in place.
    std::vector<int> piv(static_cast<size_t>(n));
    for (int k = 0; k < n; ++k) {
        int best = k;
        double best_abs = std::abs(M[static_cast<size_t>(k) * static_cast<size_t>(n) + static_cast<size_t>(k)]);
        for (int i = k + 1; i < n; ++i) {
            double a = std::abs(M[static_cast<size_t>(i) * static_cast<size_t>(n) + static_cast<size_t>(k)]);
            if (a > best_abs) {
                best_abs = a;
                best = i;
            }
        }
        if (best_abs <= 1e-14 * max_abs)
            throw SolveError(SolveError::Kind::Singular,
                             "matrix is singular to working precision at column " + std::to_string(k));
        piv[static_cast<size_t>(k)] = best;
        if (best != k)
            for (int j = 0; j < n; ++j)
                std::swap(M[static_cast<size_t>(k) * static_cast<size_t>(n) + static_cast<size_t>(j)],
                          M[static_cast<size_t>(best) * static_cast<size_t>(n) + static_cast<size_t>(j)]);
        double pivot = M[static_cast<size_t>(k) * static_cast<size_t>(n) + static_cast<size_t>(k)];
        for (int i = k + 1; i < n; ++i) {
            double* Mi = &M[static_cast<size_t>(i) * static_cast<size_t>(n)];
            const double* Mk = &M[static_cast<size_t>(k) * static_cast<size_t>(n)];
            double f = Mi[k] / pivot;
            Mi[k] = f;
            if (f != 0.0)
                for (int j = k + 1; j < n; ++j) Mi[j] -= f * Mk[j];
        }
    }

    std::vector<double> x = b;
    for (int k = 0; k < n; ++k) {
        std::swap(x[static_cast<size_t>(k)], x[static_cast<size_t>(piv[static_cast<size_t>(k)])]);
        // forward substitution uses the stored multipliers below the diagonal
    }
    for (int i = 1; i < n; ++i) {
        const double* Mi = &M[static_cast<size_t>(i) * static_cast<size_t>(n)];
        double s = x[static_cast<size_t>(i)];
        for (int j = 0; j < i; ++j) s -= Mi[j] * x[static_cast<size_t>(j)];
        x[static_cast<size_t>(i)] = s;
    }
    for (int i = n - 1; i >= 0; --i) {
        const double* Mi = &M[static_cast<size_t>(i) * static_cast<size_t>(n)];
        double s = x[static_cast<size_t>(i)];
        for (int j = i + 1; j < n; ++j) s -= Mi[j] * x[static_cast<size_t>(j)];
        x[static_cast<size_t>(i)] = s / Mi[i];
    }

    if (sys.constraint) detail::apply_constraint_shift(x, *sys.constraint);
    if (stats) {
        std::vector<double> Ax;
        sys.A.mul(x, Ax);
        double rnorm = 0.0, bnorm = 0.0;
        for (int i = 0; i < n; ++i) {
            rnorm += (Ax[static_cast<size_t>(i)] - b[static_cast<size_t>(i)]) * (Ax[static_cast<size_t>(i)] - b[static_cast<size_t>(i)]);
            bnorm += b[static_cast<size_t>(i)] * b[static_cast<size_t>(i)];
        }
        *stats = {n, bnorm > 0.0 ? std::sqrt(rnorm / bnorm) : 0.0, true};
    }
    return x;
}

} // namespace thermoshadow
