#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"

namespace thermoshadow {

struct Vec2 {
    double x = 0.0, y = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::sqrt(dot(a, a)); }

/// The boundary splits into the contact part Gamma (where the prescribed
/// current density stays positive) and the remainder Sigma.
enum class BoundaryTag { Gamma, Sigma };

/// One boundary segment, directed so the interior lies on its left
/// (counter-clockwise along the boundary loop).
struct BoundaryEdge {
    int a = 0, b = 0;
    BoundaryTag tag = BoundaryTag::Sigma;
};

/// Conforming triangulation of a planar domain. Triangles are counter-clockwise;
/// `edge` lists every boundary segment exactly once, tagged Gamma or Sigma.
struct TriMesh {
    std::vector<Vec2> vertex;
    std::vector<std::array<int, 3>> tri;
    std::vector<BoundaryEdge> edge;

    int num_vertices() const { return static_cast<int>(vertex.size()); }
    int num_triangles() const { return static_cast<int>(tri.size()); }
    int num_edges() const { return static_cast<int>(edge.size()); }

    double tri_area(int t) const {
        const auto& v = tri[static_cast<size_t>(t)];
        return 0.5 * cross(vertex[v[1]] - vertex[v[0]], vertex[v[2]] - vertex[v[0]]);
    }
    Vec2 centroid(int t) const {
        const auto& v = tri[static_cast<size_t>(t)];
        return (1.0 / 3.0) * (vertex[v[0]] + vertex[v[1]] + vertex[v[2]]);
    }
    double edge_length(int e) const {
        const auto& s = edge[static_cast<size_t>(e)];
        return norm(vertex[s.b] - vertex[s.a]);
    }
    Vec2 edge_midpoint(int e) const {
        const auto& s = edge[static_cast<size_t>(e)];
        return 0.5 * (vertex[s.a] + vertex[s.b]);
    }
    /// Unit outward normal; valid because edges run counter-clockwise.
    Vec2 outward_normal(int e) const {
        const auto& s = edge[static_cast<size_t>(e)];
        Vec2 d = vertex[s.b] - vertex[s.a];
        double len = norm(d);
        return {d.y / len, -d.x / len};
    }
};

enum class Side { Left, Right, Bottom, Top };

namespace detail {

inline std::string side_name(Side s) {
    switch (s) {
        case Side::Left: return "left";
        case Side::Right: return "right";
        case Side::Bottom: return "bottom";
        case Side::Top: return "top";
    }
    return "?";
}

} // namespace detail

/// Validates the structural invariants of a mesh:
///  - every triangle has strictly positive (counter-clockwise) area,
///  - the tagged boundary edges are exactly the topological boundary and form
///    one closed loop,
///  - both Gamma and Sigma are nonempty,
///  - no two vertices coincide within 1e-12 of the coordinate span.
/// Throws InvalidInput on the first violation.
inline void validate_mesh(const TriMesh& mesh) {
    if (mesh.num_vertices() < 3 || mesh.num_triangles() < 1)
        throw InvalidInput("mesh must contain at least 3 vertices and 1 triangle");

    const int nv = mesh.num_vertices();
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        for (int k = 0; k < 3; ++k) {
            int v = mesh.tri[static_cast<size_t>(t)][static_cast<size_t>(k)];
            if (v < 0 || v >= nv)
                throw InvalidInput("triangle " + std::to_string(t) + " references vertex " +
                                   std::to_string(v) + " out of range");
        }
        if (mesh.tri_area(t) <= 0.0)
            throw InvalidInput("triangle " + std::to_string(t) +
                               " has non-positive area (vertices must be counter-clockwise)");
    }

    // Topological boundary: undirected edges used by exactly one triangle.
    std::map<std::pair<int, int>, int> use_count;
    for (const auto& t : mesh.tri) {
        for (int k = 0; k < 3; ++k) {
            int a = t[static_cast<size_t>(k)], b = t[static_cast<size_t>((k + 1) % 3)];
            ++use_count[{std::min(a, b), std::max(a, b)}];
        }
    }
    std::set<std::pair<int, int>> boundary;
    for (const auto& [key, count] : use_count) {
        if (count > 2)
            throw InvalidInput("edge (" + std::to_string(key.first) + "," +
                               std::to_string(key.second) + ") shared by more than two triangles");
        if (count == 1) boundary.insert(key);
    }

    std::set<std::pair<int, int>> tagged;
    for (const auto& e : mesh.edge) {
        if (e.a < 0 || e.a >= nv || e.b < 0 || e.b >= nv)
            throw InvalidInput("boundary edge references vertex out of range");
        auto key = std::make_pair(std::min(e.a, e.b), std::max(e.a, e.b));
        if (!tagged.insert(key).second)
            throw InvalidInput("boundary edge (" + std::to_string(e.a) + "," +
                               std::to_string(e.b) + ") listed twice");
        if (!boundary.count(key))
            throw InvalidInput("edge (" + std::to_string(e.a) + "," + std::to_string(e.b) +
                               ") is tagged as boundary but lies in the interior");
    }
    if (tagged.size() < boundary.size())
        throw InvalidInput("open boundary loop: " +
                           std::to_string(boundary.size() - tagged.size()) +
                           " topological boundary edge(s) missing from the edge list");

    // Closed loop: every boundary vertex must have exactly two incident
    // boundary edges, and the loop must be connected.
    std::map<int, std::vector<int>> adjacent;
    for (const auto& [a, b] : tagged) {
        adjacent[a].push_back(b);
        adjacent[b].push_back(a);
    }
    for (const auto& [v, nbrs] : adjacent)
        if (nbrs.size() != 2)
            throw InvalidInput("boundary vertex " + std::to_string(v) + " has " +
                               std::to_string(nbrs.size()) + " incident boundary edges (want 2)");
    if (!adjacent.empty()) {
        std::set<int> seen;
        std::vector<int> stack = {adjacent.begin()->first};
        while (!stack.empty()) {
            int v = stack.back();
            stack.pop_back();
            if (!seen.insert(v).second) continue;
            for (int w : adjacent[v]) stack.push_back(w);
        }
        if (seen.size() != adjacent.size())
            throw InvalidInput("boundary is not a single closed loop");
    }

    bool has_gamma = false, has_sigma = false;
    for (const auto& e : mesh.edge)
        (e.tag == BoundaryTag::Gamma ? has_gamma : has_sigma) = true;
    if (!has_gamma) throw InvalidInput("boundary has no Gamma (contact) edges");
    if (!has_sigma) throw InvalidInput("boundary has no Sigma edges");

    // Duplicate vertices within 1e-12 of the coordinate span.
    double lo_x = mesh.vertex[0].x, hi_x = lo_x, lo_y = mesh.vertex[0].y, hi_y = lo_y;
    for (const auto& p : mesh.vertex) {
        lo_x = std::min(lo_x, p.x);
        hi_x = std::max(hi_x, p.x);
        lo_y = std::min(lo_y, p.y);
        hi_y = std::max(hi_y, p.y);
    }
    const double span = std::max({hi_x - lo_x, hi_y - lo_y, 1e-300});
    const double tol = 1e-12 * span;
    std::vector<int> order(static_cast<size_t>(nv));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int i, int j) {
        const auto& p = mesh.vertex[static_cast<size_t>(i)];
        const auto& q = mesh.vertex[static_cast<size_t>(j)];
        return p.x != q.x ? p.x < q.x : p.y < q.y;
    });
    for (size_t i = 0; i < order.size(); ++i) {
        for (size_t j = i + 1; j < order.size(); ++j) {
            const auto& p = mesh.vertex[static_cast<size_t>(order[i])];
            const auto& q = mesh.vertex[static_cast<size_t>(order[j])];
            if (q.x - p.x > tol) break;
            if (std::abs(q.y - p.y) <= tol && std::abs(q.x - p.x) <= tol)
                throw InvalidInput("vertices " + std::to_string(order[i]) + " and " +
                                   std::to_string(order[j]) + " coincide within tolerance");
        }
    }
}

/// Structured triangulation of the unit square: nx-by-ny cells, each split
/// along its lower-left/upper-right diagonal. Vertices are numbered row-major
/// (index iy*(nx+1)+ix), so repeated runs produce identical meshes. The sides
/// listed in `gamma_sides` form Gamma; the rest form Sigma. Rejects an empty
/// selection and the full four-side selection (Sigma must be nonempty).
inline TriMesh generate_rect_mesh(int nx, int ny, const std::set<Side>& gamma_sides) {
    if (nx < 1 || ny < 1)
        throw InvalidInput("generate_rect_mesh: need nx >= 1 and ny >= 1");
    if (gamma_sides.empty())
        throw InvalidInput("generate_rect_mesh: Gamma side selection is empty");
    if (gamma_sides.size() == 4)
        throw InvalidInput("generate_rect_mesh: all four sides selected; Sigma would be empty");

    TriMesh mesh;
    mesh.vertex.reserve(static_cast<size_t>((nx + 1) * (ny + 1)));
    for (int iy = 0; iy <= ny; ++iy)
        for (int ix = 0; ix <= nx; ++ix)
            mesh.vertex.push_back({static_cast<double>(ix) / nx, static_cast<double>(iy) / ny});

    auto vid = [nx](int ix, int iy) { return iy * (nx + 1) + ix; };
    mesh.tri.reserve(static_cast<size_t>(2 * nx * ny));
    for (int iy = 0; iy < ny; ++iy) {
        for (int ix = 0; ix < nx; ++ix) {
            int v00 = vid(ix, iy), v10 = vid(ix + 1, iy);
            int v01 = vid(ix, iy + 1), v11 = vid(ix + 1, iy + 1);
            mesh.tri.push_back({v00, v10, v11});
            mesh.tri.push_back({v00, v11, v01});
        }
    }

    auto tag_of = [&](Side s) {
        return gamma_sides.count(s) ? BoundaryTag::Gamma : BoundaryTag::Sigma;
    };
    // Counter-clockwise loop: bottom, right, top, left.
    for (int ix = 0; ix < nx; ++ix)
        mesh.edge.push_back({vid(ix, 0), vid(ix + 1, 0), tag_of(Side::Bottom)});
    for (int iy = 0; iy < ny; ++iy)
        mesh.edge.push_back({vid(nx, iy), vid(nx, iy + 1), tag_of(Side::Right)});
    for (int ix = nx; ix > 0; --ix)
        mesh.edge.push_back({vid(ix, ny), vid(ix - 1, ny), tag_of(Side::Top)});
    for (int iy = ny; iy > 0; --iy)
        mesh.edge.push_back({vid(0, iy), vid(0, iy - 1), tag_of(Side::Left)});

    validate_mesh(mesh);
    return mesh;
}

/// Reads the plain-text mesh format:
///   line 1: "nv nt ne"
///   nv lines "x y", nt lines "i j k" (0-based, counter-clockwise),
///   ne lines "a b TAG" with TAG either G or S.
/// Tokens are whitespace-separated; '#' starts a comment. Errors carry the
/// offending 1-based line number.
inline TriMesh load_mesh(std::istream& in, const std::string& name = "<stream>") {
    TriMesh mesh;
    int line_no = 0;
    std::string line;

    auto next_tokens = [&](int expected, const std::string& what) {
        while (std::getline(in, line)) {
            ++line_no;
            if (auto pos = line.find('#'); pos != std::string::npos) line.erase(pos);
            std::istringstream ss(line);
            std::vector<std::string> tok;
            std::string t;
            while (ss >> t) tok.push_back(t);
            if (tok.empty()) continue;
            if (static_cast<int>(tok.size()) != expected)
                throw ParseError(name + ": expected " + std::to_string(expected) +
                                     " fields for " + what + ", got " +
                                     std::to_string(tok.size()),
                                 line_no);
            return tok;
        }
        throw ParseError(name + ": unexpected end of file while reading " + what, line_no);
    };
    auto to_int = [&](const std::string& s, const std::string& what) {
        size_t used = 0;
        int v = 0;
        try {
            v = std::stoi(s, &used);
        } catch (const std::exception&) {
            throw ParseError(name + ": bad integer '" + s + "' in " + what, line_no);
        }
        if (used != s.size())
            throw ParseError(name + ": bad integer '" + s + "' in " + what, line_no);
        return v;
    };
    auto to_double = [&](const std::string& s, const std::string& what) {
        size_t used = 0;
        double v = 0;
        try {
            v = std::stod(s, &used);
        } catch (const std::exception&) {
            throw ParseError(name + ": bad number '" + s + "' in " + what, line_no);
        }
        if (used != s.size() || !std::isfinite(v))
            throw ParseError(name + ": bad number '" + s + "' in " + what, line_no);
        return v;
    };

    auto header = next_tokens(3, "header");
    const int nv = to_int(header[0], "header");
    const int nt = to_int(header[1], "header");
    const int ne = to_int(header[2], "header");
    if (nv < 3 || nt < 1 || ne < 3)
        throw ParseError(name + ": implausible counts nv=" + std::to_string(nv) +
                             " nt=" + std::to_string(nt) + " ne=" + std::to_string(ne),
                         line_no);

    for (int i = 0; i < nv; ++i) {
        auto tok = next_tokens(2, "vertex " + std::to_string(i));
        mesh.vertex.push_back({to_double(tok[0], "vertex"), to_double(tok[1], "vertex")});
    }
    for (int i = 0; i < nt; ++i) {
        auto tok = next_tokens(3, "triangle " + std::to_string(i));
        std::array<int, 3> t{};
        for (int k = 0; k < 3; ++k) {
            t[static_cast<size_t>(k)] = to_int(tok[static_cast<size_t>(k)], "triangle");
            if (t[static_cast<size_t>(k)] < 0 || t[static_cast<size_t>(k)] >= nv)
                throw ParseError(name + ": triangle vertex index " +
                                     std::to_string(t[static_cast<size_t>(k)]) +
                                     " out of range [0," + std::to_string(nv - 1) + "]",
                                 line_no);
        }
        mesh.tri.push_back(t);
        if (mesh.tri_area(static_cast<int>(mesh.tri.size()) - 1) <= 0.0)
            throw ParseError(name + ": triangle " + std::to_string(i) +
                                 " has non-positive area (vertex order must be counter-clockwise)",
                             line_no);
    }
    for (int i = 0; i < ne; ++i) {
        auto tok = next_tokens(3, "boundary edge " + std::to_string(i));
        BoundaryEdge e;
        e.a = to_int(tok[0], "boundary edge");
        e.b = to_int(tok[1], "boundary edge");
        if (e.a < 0 || e.a >= nv || e.b < 0 || e.b >= nv)
            throw ParseError(name + ": boundary edge vertex index out of range", line_no);
        if (tok[2] == "G")
            e.tag = BoundaryTag::Gamma;
        else if (tok[2] == "S")
            e.tag = BoundaryTag::Sigma;
        else
            throw ParseError(name + ": boundary tag must be G or S, got '" + tok[2] + "'",
                             line_no);
        mesh.edge.push_back(e);
    }

    validate_mesh(mesh);
    return mesh;
}

inline TriMesh load_mesh(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open mesh file '" + path + "'");
    return load_mesh(in, path);
}

/// Total length of the boundary edges carrying `tag`.
inline double boundary_measure(const TriMesh& mesh, BoundaryTag tag) {
    double sum = 0.0;
    for (int e = 0; e < mesh.num_edges(); ++e)
        if (mesh.edge[static_cast<size_t>(e)].tag == tag) sum += mesh.edge_length(e);
    return sum;
}

/// Total boundary length.
inline double boundary_measure(const TriMesh& mesh) {
    return boundary_measure(mesh, BoundaryTag::Gamma) +
           boundary_measure(mesh, BoundaryTag::Sigma);
}

/// Classifies a generated-mesh boundary edge by which side of the unit square
/// its midpoint lies on. Only meaningful for meshes from generate_rect_mesh.
inline Side classify_side(const TriMesh& mesh, int e) {
    Vec2 m = mesh.edge_midpoint(e);
    const double tol = 1e-12;
    if (std::abs(m.x) < tol) return Side::Left;
    if (std::abs(m.x - 1.0) < tol) return Side::Right;
    if (std::abs(m.y) < tol) return Side::Bottom;
    if (std::abs(m.y - 1.0) < tol) return Side::Top;
    throw InvalidInput("boundary edge midpoint lies on no side of the unit square");
}

} // namespace thermoshadow
