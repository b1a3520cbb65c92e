#pragma once

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "coefficients.hpp"
#include "errors.hpp"
#include "mesh.hpp"
#include "picard.hpp"
#include "shadow.hpp"

namespace thermoshadow {

using ordered_json = nlohmann::ordered_json;

/// Everything a command needs, resolved from one JSON run spec. `raw` keeps
/// the parsed document so outputs can echo the exact configuration they ran
/// under. `k_list` is nonempty exactly when the spec chose "k_list" over "k";
/// `data.k` then holds the first entry so single-solve paths stay usable.
struct RunSpec {
    ordered_json raw;
    TriMesh mesh;
    CoefficientModel model;
    ProblemData data;
    std::vector<double> k_list;
    PicardSettings picard;
    ShadowSettings shadow;
    std::string mms_problem;  // empty when the spec has no "mms" block
    std::vector<int> mms_sizes;

    bool has_sweep() const { return !k_list.empty(); }
    bool has_mms() const { return !mms_problem.empty(); }
};

namespace specdetail {

[[noreturn]] inline void fail(const std::string& msg) {
    throw InvalidInput("run spec: " + msg);
}

/// Fail-closed key audit: anything not on the allow list is an error, so a
/// typo can never silently fall back to a default.
inline void expect_keys(const ordered_json& j, const std::string& where,
                        std::initializer_list<const char*> allowed) {
    for (const auto& item : j.items()) {
        bool known = false;
        for (const char* k : allowed)
            if (item.key() == k) {
                known = true;
                break;
            }
        if (!known) {
            std::string list;
            for (const char* k : allowed) {
                if (!list.empty()) list += ", ";
                list += k;
            }
            fail("unknown key \"" + item.key() + "\" in " + where + " (allowed: " + list + ")");
        }
    }
}

inline const ordered_json& member(const ordered_json& j, const char* key,
                                  const std::string& where) {
    auto it = j.find(key);
    if (it == j.end()) fail("missing key \"" + std::string(key) + "\" in " + where);
    return *it;
}

inline const ordered_json& object(const ordered_json& j, const char* key,
                                  const std::string& where) {
    const ordered_json& v = member(j, key, where);
    if (!v.is_object()) fail("\"" + std::string(key) + "\" in " + where + " must be an object");
    return v;
}

inline double number(const ordered_json& j, const char* key, const std::string& where) {
    const ordered_json& v = member(j, key, where);
    if (!v.is_number()) fail("\"" + std::string(key) + "\" in " + where + " must be a number");
    return v.get<double>();
}

inline double number_or(const ordered_json& j, const char* key, const std::string& where,
                        double fallback) {
    return j.contains(key) ? number(j, key, where) : fallback;
}

inline int integer(const ordered_json& j, const char* key, const std::string& where) {
    const ordered_json& v = member(j, key, where);
    if (!v.is_number_integer())
        fail("\"" + std::string(key) + "\" in " + where + " must be an integer");
    return v.get<int>();
}

inline int integer_or(const ordered_json& j, const char* key, const std::string& where,
                      int fallback) {
    return j.contains(key) ? integer(j, key, where) : fallback;
}

inline bool flag_or(const ordered_json& j, const char* key, const std::string& where,
                    bool fallback) {
    if (!j.contains(key)) return fallback;
    const ordered_json& v = j[key];
    if (!v.is_boolean()) fail("\"" + std::string(key) + "\" in " + where + " must be a boolean");
    return v.get<bool>();
}

inline std::string text(const ordered_json& j, const char* key, const std::string& where) {
    const ordered_json& v = member(j, key, where);
    if (!v.is_string()) fail("\"" + std::string(key) + "\" in " + where + " must be a string");
    return v.get<std::string>();
}

inline Side side_from_name(const std::string& name) {
    if (name == "left") return Side::Left;
    if (name == "right") return Side::Right;
    if (name == "bottom") return Side::Bottom;
    if (name == "top") return Side::Top;
    fail("unknown side \"" + name + "\" (known: left, right, bottom, top)");
}

inline TriMesh parse_mesh(const ordered_json& j, const std::filesystem::path& base_dir) {
    if (!j.is_object()) fail("\"mesh\" must be an object");
    expect_keys(j, "\"mesh\"", {"generator", "file"});
    const bool has_gen = j.contains("generator");
    const bool has_file = j.contains("file");
    if (has_gen == has_file) fail("\"mesh\" needs exactly one of \"generator\" and \"file\"");

    if (has_file) {
        std::filesystem::path p = text(j, "file", "\"mesh\"");
        if (p.is_relative()) p = base_dir / p;
        return load_mesh(p.string());
    }

    const ordered_json& gen = object(j, "generator", "\"mesh\"");
    expect_keys(gen, "\"mesh.generator\"", {"nx", "ny", "gamma"});
    int nx = integer(gen, "nx", "\"mesh.generator\"");
    int ny = integer(gen, "ny", "\"mesh.generator\"");
    const ordered_json& sides = member(gen, "gamma", "\"mesh.generator\"");
    if (!sides.is_array() || sides.empty())
        fail("\"mesh.generator.gamma\" must be a nonempty array of side names");
    std::set<Side> gamma;
    for (const auto& s : sides) {
        if (!s.is_string()) fail("\"mesh.generator.gamma\" entries must be strings");
        gamma.insert(side_from_name(s.get<std::string>()));
    }
    return generate_rect_mesh(nx, ny, gamma);
}

inline SigmaLaw parse_sigma(const ordered_json& j) {
    if (!j.is_object()) fail("\"sigma\" must be an object");
    std::string law = text(j, "law", "\"sigma\"");
    if (law == "constant") {
        expect_keys(j, "\"sigma\"", {"law", "value"});
        return sigma_constant(number(j, "value", "\"sigma\""));
    }
    if (law == "tanh") {
        expect_keys(j, "\"sigma\"", {"law", "lo", "hi"});
        return sigma_tanh(number(j, "lo", "\"sigma\""), number(j, "hi", "\"sigma\""));
    }
    if (law == "checkerboard") {
        expect_keys(j, "\"sigma\"", {"law", "lo", "hi", "cells"});
        return sigma_checkerboard(number(j, "lo", "\"sigma\""), number(j, "hi", "\"sigma\""),
                                  integer(j, "cells", "\"sigma\""));
    }
    fail("unknown \"sigma.law\" \"" + law + "\" (known: constant, tanh, checkerboard)");
}

inline AlphaLaw parse_alpha(const ordered_json& j) {
    if (!j.is_object()) fail("\"alpha\" must be an object");
    std::string law = text(j, "law", "\"alpha\"");
    if (law == "constant") {
        expect_keys(j, "\"alpha\"", {"law", "value"});
        return alpha_constant(number(j, "value", "\"alpha\""));
    }
    if (law == "arctan") {
        expect_keys(j, "\"alpha\"", {"law", "c0", "c1"});
        return alpha_arctan(number(j, "c0", "\"alpha\""), number(j, "c1", "\"alpha\""));
    }
    if (law == "rational") {
        expect_keys(j, "\"alpha\"", {"law", "c0", "c1"});
        return alpha_rational(number(j, "c0", "\"alpha\""), number(j, "c1", "\"alpha\""));
    }
    if (law == "xstep") {
        expect_keys(j, "\"alpha\"", {"law", "left", "right", "split"});
        return alpha_xstep(number(j, "left", "\"alpha\""), number(j, "right", "\"alpha\""),
                           number(j, "split", "\"alpha\""));
    }
    fail("unknown \"alpha.law\" \"" + law + "\" (known: constant, arctan, rational, xstep)");
}

inline SignCase parse_sign_case(const ordered_json& j) {
    if (!j.contains("sign_case")) return SignCase::Positive;
    std::string s = text(j, "sign_case", "top level");
    if (s == "positive") return SignCase::Positive;
    if (s == "negative") return SignCase::Negative;
    fail("\"sign_case\" must be \"positive\" or \"negative\"");
}

inline std::function<double(Vec2)> parse_g(const ordered_json& j) {
    if (!j.is_object()) fail("\"problem.g\" must be an object");
    std::string law = text(j, "law", "\"problem.g\"");
    if (law == "constant") {
        expect_keys(j, "\"problem.g\"", {"law", "value"});
        double v = number(j, "value", "\"problem.g\"");
        return [v](Vec2) { return v; };
    }
    if (law == "linear") {
        expect_keys(j, "\"problem.g\"", {"law", "a", "bx", "by"});
        double a = number(j, "a", "\"problem.g\"");
        double bx = number(j, "bx", "\"problem.g\"");
        double by = number(j, "by", "\"problem.g\"");
        return [a, bx, by](Vec2 p) { return a + bx * p.x + by * p.y; };
    }
    fail("unknown \"problem.g.law\" \"" + law + "\" (known: constant, linear)");
}

inline std::vector<double> read_edge_values(const std::filesystem::path& path, int expected) {
    std::ifstream in(path);
    if (!in) fail("cannot open boundary data file \"" + path.string() + "\"");
    std::vector<double> values;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto pos = line.find('#'); pos != std::string::npos) line.erase(pos);
        std::istringstream ss(line);
        double v;
        while (ss >> v) {
            if (!std::isfinite(v))
                throw ParseError("boundary data file \"" + path.string() + "\": nonfinite value",
                                 line_no);
            values.push_back(v);
        }
        if (!ss.eof())
            throw ParseError("boundary data file \"" + path.string() + "\": expected numbers",
                             line_no);
    }
    if (static_cast<int>(values.size()) != expected)
        fail("boundary data file \"" + path.string() + "\" holds " +
             std::to_string(values.size()) + " values; the mesh has " + std::to_string(expected) +
             " boundary edges");
    return values;
}

inline std::vector<double> parse_h(const ordered_json& j, const TriMesh& mesh,
                                   const std::filesystem::path& base_dir) {
    if (!j.is_object()) fail("\"problem.h\" must be an object");
    expect_keys(j, "\"problem.h\"", {"per_tag", "per_side", "per_edge_file"});
    int given = static_cast<int>(j.contains("per_tag")) + static_cast<int>(j.contains("per_side")) +
                static_cast<int>(j.contains("per_edge_file"));
    if (given != 1)
        fail("\"problem.h\" needs exactly one of \"per_tag\", \"per_side\", \"per_edge_file\"");

    std::vector<double> h(static_cast<size_t>(mesh.num_edges()), 0.0);
    if (j.contains("per_tag")) {
        const ordered_json& t = object(j, "per_tag", "\"problem.h\"");
        expect_keys(t, "\"problem.h.per_tag\"", {"gamma", "sigma"});
        double on_gamma = number(t, "gamma", "\"problem.h.per_tag\"");
        double on_sigma = number(t, "sigma", "\"problem.h.per_tag\"");
        for (int e = 0; e < mesh.num_edges(); ++e)
            h[static_cast<size_t>(e)] =
                mesh.edge[static_cast<size_t>(e)].tag == BoundaryTag::Gamma ? on_gamma : on_sigma;
        return h;
    }
    if (j.contains("per_side")) {
        const ordered_json& s = object(j, "per_side", "\"problem.h\"");
        expect_keys(s, "\"problem.h.per_side\"", {"left", "right", "bottom", "top"});
        double left = number(s, "left", "\"problem.h.per_side\"");
        double right = number(s, "right", "\"problem.h.per_side\"");
        double bottom = number(s, "bottom", "\"problem.h.per_side\"");
        double top = number(s, "top", "\"problem.h.per_side\"");
        for (int e = 0; e < mesh.num_edges(); ++e) {
            switch (classify_side(mesh, e)) {
                case Side::Left: h[static_cast<size_t>(e)] = left; break;
                case Side::Right: h[static_cast<size_t>(e)] = right; break;
                case Side::Bottom: h[static_cast<size_t>(e)] = bottom; break;
                case Side::Top: h[static_cast<size_t>(e)] = top; break;
            }
        }
        return h;
    }
    std::filesystem::path p = text(j, "per_edge_file", "\"problem.h\"");
    if (p.is_relative()) p = base_dir / p;
    return read_edge_values(p, mesh.num_edges());
}

/// Declared levels of h default to the tightest values the assembled datum
/// satisfies; the audit later checks them against the sign convention.
inline void default_h_bounds(const TriMesh& mesh, SignCase sign_case, ProblemData& data,
                             bool have_gamma, bool have_sigma) {
    const double inf = std::numeric_limits<double>::infinity();
    double gamma_min = inf, gamma_max = -inf, sigma_min = inf, sigma_max = -inf;
    for (int e = 0; e < mesh.num_edges(); ++e) {
        double v = data.h[static_cast<size_t>(e)];
        if (mesh.edge[static_cast<size_t>(e)].tag == BoundaryTag::Gamma) {
            gamma_min = std::min(gamma_min, v);
            gamma_max = std::max(gamma_max, v);
        } else {
            sigma_min = std::min(sigma_min, v);
            sigma_max = std::max(sigma_max, v);
        }
    }
    if (!have_gamma)
        data.h_bound_gamma = gamma_min > gamma_max  // empty Gamma: leave the audit to flag it
                                 ? 0.0
                                 : (sign_case == SignCase::Positive ? gamma_min : -gamma_max);
    if (!have_sigma)
        data.h_bound_sigma = sigma_min > sigma_max
                                 ? 0.0
                                 : (sign_case == SignCase::Positive ? sigma_min : -sigma_max);
}

inline PicardSettings parse_solver(const ordered_json& root) {
    PicardSettings s;
    if (!root.contains("solver")) return s;
    const ordered_json& j = root["solver"];
    if (!j.is_object()) fail("\"solver\" must be an object");
    expect_keys(j, "\"solver\"",
                {"picard_tol", "picard_max_iterations", "damping", "adaptive_damping",
                 "linear_tol", "linear_max_iterations", "dense_fallback"});
    s.tol = number_or(j, "picard_tol", "\"solver\"", s.tol);
    s.max_iterations = integer_or(j, "picard_max_iterations", "\"solver\"", s.max_iterations);
    s.damping = number_or(j, "damping", "\"solver\"", s.damping);
    s.adaptive_damping = flag_or(j, "adaptive_damping", "\"solver\"", s.adaptive_damping);
    s.linear.tol = number_or(j, "linear_tol", "\"solver\"", s.linear.tol);
    s.linear.max_iterations =
        integer_or(j, "linear_max_iterations", "\"solver\"", s.linear.max_iterations);
    s.linear.allow_dense_fallback =
        flag_or(j, "dense_fallback", "\"solver\"", s.linear.allow_dense_fallback);
    return s;
}

inline ShadowSettings parse_shadow(const ordered_json& root, const LinearSettings& linear) {
    ShadowSettings s;
    s.linear = linear;  // the scalar limit shares the linear-solver policy
    if (!root.contains("shadow")) return s;
    const ordered_json& j = root["shadow"];
    if (!j.is_object()) fail("\"shadow\" must be an object");
    expect_keys(j, "\"shadow\"", {"tol", "max_iterations", "theta0", "use_cache"});
    s.tol = number_or(j, "tol", "\"shadow\"", s.tol);
    s.max_iterations = integer_or(j, "max_iterations", "\"shadow\"", s.max_iterations);
    s.theta0 = number_or(j, "theta0", "\"shadow\"", s.theta0);
    s.use_cache = flag_or(j, "use_cache", "\"shadow\"", s.use_cache);
    return s;
}

inline void parse_mms(const ordered_json& root, RunSpec& spec) {
    if (!root.contains("mms")) return;
    const ordered_json& j = root["mms"];
    if (!j.is_object()) fail("\"mms\" must be an object");
    expect_keys(j, "\"mms\"", {"problem", "sizes"});
    spec.mms_problem = text(j, "problem", "\"mms\"");
    const ordered_json& sizes = member(j, "sizes", "\"mms\"");
    if (!sizes.is_array() || sizes.empty())
        fail("\"mms.sizes\" must be a nonempty array of integers");
    for (const auto& v : sizes) {
        if (!v.is_number_integer()) fail("\"mms.sizes\" entries must be integers");
        spec.mms_sizes.push_back(v.get<int>());
    }
}

}  // namespace specdetail

/// Builds a RunSpec from a parsed document. `base_dir` anchors relative paths
/// ("mesh.file", "problem.h.per_edge_file"), normally the spec file's folder.
inline RunSpec parse_run_spec(const ordered_json& j, const std::filesystem::path& base_dir) {
    using namespace specdetail;
    if (!j.is_object()) fail("top level must be an object");
    expect_keys(j, "the top level",
                {"schema_version", "mesh", "sigma", "alpha", "sign_case", "problem", "solver",
                 "shadow", "mms"});
    int version = integer(j, "schema_version", "the top level");
    if (version != 1) fail("unsupported schema_version " + std::to_string(version) + " (have: 1)");

    RunSpec spec;
    spec.raw = j;
    spec.mesh = parse_mesh(member(j, "mesh", "the top level"), base_dir);
    spec.model = make_model(parse_sigma(member(j, "sigma", "the top level")),
                            parse_alpha(member(j, "alpha", "the top level")), parse_sign_case(j));

    const ordered_json& prob = object(j, "problem", "the top level");
    expect_keys(prob, "\"problem\"",
                {"k", "k_list", "g", "h", "h_bound_gamma", "h_bound_sigma", "c1_estimate"});
    const bool has_k = prob.contains("k");
    const bool has_list = prob.contains("k_list");
    if (has_k == has_list) fail("\"problem\" needs exactly one of \"k\" and \"k_list\"");
    if (has_list) {
        const ordered_json& ks = prob["k_list"];
        if (!ks.is_array() || ks.empty())
            fail("\"problem.k_list\" must be a nonempty array of numbers");
        for (const auto& v : ks) {
            if (!v.is_number()) fail("\"problem.k_list\" entries must be numbers");
            double k = v.get<double>();
            if (!(k > 0.0)) fail("\"problem.k_list\" entries must be positive");
            if (!spec.k_list.empty() && !(k > spec.k_list.back()))
                fail("\"problem.k_list\" must be strictly increasing");
            spec.k_list.push_back(k);
        }
        spec.data.k = spec.k_list.front();
    } else {
        spec.data.k = number(prob, "k", "\"problem\"");
        if (!(spec.data.k > 0.0)) fail("\"problem.k\" must be positive");
    }

    if (prob.contains("g")) {
        spec.data.g = parse_g(prob["g"]);
    } else {
        spec.data.g = [](Vec2) { return 0.0; };
    }
    spec.data.h = parse_h(member(prob, "h", "\"problem\""), spec.mesh, base_dir);

    const bool have_gamma = prob.contains("h_bound_gamma");
    const bool have_sigma = prob.contains("h_bound_sigma");
    spec.data.h_bound_gamma = number_or(prob, "h_bound_gamma", "\"problem\"", 0.0);
    spec.data.h_bound_sigma = number_or(prob, "h_bound_sigma", "\"problem\"", 0.0);
    default_h_bounds(spec.mesh, spec.model.sign_case, spec.data, have_gamma, have_sigma);
    spec.data.c1_estimate = number_or(prob, "c1_estimate", "\"problem\"", 0.0);

    spec.picard = parse_solver(j);
    spec.shadow = parse_shadow(j, spec.picard.linear);
    parse_mms(j, spec);
    return spec;
}

/// Loads and resolves a run spec from disk. JSON syntax errors surface as
/// ParseError; schema violations as InvalidInput naming the offending key.
inline RunSpec load_run_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("run spec: cannot open \"" + path + "\"");
    ordered_json j;
    try {
        j = ordered_json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("run spec \"" + path + "\": " + e.what());
    }
    return parse_run_spec(j, std::filesystem::path(path).parent_path());
}

}  // namespace thermoshadow
