#pragma once

#include "feller/common.hpp"
#include "feller/geometry.hpp"
#include "feller/measure.hpp"
#include "feller/operator.hpp"
#include "feller/resolvent.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace feller {

/// Everything a run needs, read from an INI file with sections [domain],
/// [operator], [measure], [numerics], [task] and [run]. Physics-bearing
/// fields have no defaults; numerical knobs do.
struct RunConfig {
    // [domain]
    DomainKind domain_kind = DomainKind::half_line;
    int dimension = 1;
    double radius = 1.0;

    // [operator]
    std::string operator_name;  ///< a builtin name or "custom"
    double alpha = 0.0;
    double beta = 0.0;
    CustomCoefficients custom;

    // [measure]
    std::string measure_kind;  ///< dirac | radial-dirac | shell | power-tail
    std::vector<Atom> atoms;
    double r_inner = 0.0;
    double r_outer = 0.0;
    double exponent = 0.0;

    // [numerics]
    double h = 0.0;
    double tau = 0.01;
    double dt = 1e-3;
    double tol = 1e-8;
    double tv_tol = 1e-3;
    int max_n = 64;
    std::optional<int> n0;
    std::optional<int> n;  ///< truncation used for evolution; defaults to the exhaustion of f = 1
    std::optional<double> window;
    std::size_t particles = 1000;

    // [task]
    double lambda = 1.0;
    double t = 1.0;
    std::vector<double> times;
    std::string initial = "constant";  ///< constant | indicator | expression
    double value = 1.0;
    Point box_lo = Point::Zero();
    Point box_hi = Point::Zero();
    std::string expression;
    Point x0 = Point::Zero();
    std::string mode;  ///< lyapunov: verify | modify; invariant: abel | stationary | evolve-compare
    int abel_halvings = 16;
    double burn_in = 10.0;
    double horizon = 100.0;
    double sample_every = 0.01;

    // [run]
    std::uint64_t seed = 1;
    int jobs = 0;

    bool operator==(const RunConfig&) const = default;
};

/// Strict parse: unknown sections or keys, missing physics fields and
/// out-of-range values raise ConfigError naming the key.
RunConfig parse_config(std::istream& is);
RunConfig load_config(const std::string& path);

/// Canonical INI text; parse_config(serialize_config(c)) == c.
std::string serialize_config(const RunConfig& config);

/// FNV-1a hash of the canonical text, as 16 hex digits.
std::string config_hash(const RunConfig& config);

CoefficientField make_operator(const RunConfig& config);
BoundaryMeasureSpec make_measure(const RunConfig& config);
DomainSpec make_domain(const RunConfig& config);
Problem make_problem(const RunConfig& config);

}  // namespace feller
