#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace thermoshadow {

/// Base class for every error thrown by this library.
struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed input file or JSON spec. Carries a 1-based line number when the
/// source is a line-oriented text format (0 when not applicable).
struct ParseError : Error {
    int line = 0;
    ParseError(const std::string& what, int line_no = 0)
        : Error(line_no > 0 ? what + " (line " + std::to_string(line_no) + ")" : what),
          line(line_no) {}
};

/// A mesh, coefficient model, or problem datum violating a structural invariant.
struct InvalidInput : Error {
    using Error::Error;
};

/// Linear or nonlinear solve failure. `history` holds per-iteration residuals
/// (relative) up to the point of failure, for post-mortem inspection.
struct SolveError : Error {
    enum class Kind { MaxIterations, Indefinite, Singular, TooLarge, Stalled };
    Kind kind;
    std::vector<double> history;
    SolveError(Kind k, const std::string& what, std::vector<double> hist = {})
        : Error(what), kind(k), history(std::move(hist)) {}
};

} // namespace thermoshadow
