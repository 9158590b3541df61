#pragma once

#include "feller/common.hpp"
#include "feller/geometry.hpp"
#include "feller/measure.hpp"
#include "feller/operator.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace feller {

/// A candidate Lyapunov function V with its image under the generator.
struct LyapunovSpec {
    std::string name;
    std::function<double(const Point&)> V;
    std::function<double(const Point&)> AV;
};

/// V = |x|^2 with AV = 2 drift_balance.
LyapunovSpec quadratic_lyapunov(const CoefficientField& coeff);

/// V = c, AV = 0.
LyapunovSpec constant_lyapunov(double c = 1.0);

struct UniquenessReport {
    bool pass = false;
    bool grows = false;            ///< (a) V increases to infinity across truncations
    bool generator_bounded = false;  ///< (b) AV finite on every truncation
    bool stable = false;           ///< radius agrees across truncations
    std::optional<double> radius;  ///< (c) lambda V - AV >= 0 outside B_r
    std::vector<double> shell_minima;
    std::vector<double> generator_max;
    std::string message;
};

/// Checks lambda V - AV >= 0 outside some ball, with V growing and AV bounded
/// on every grid of the sequence (ordered by increasing truncation).
UniquenessReport verify_uniqueness_lyapunov(const LyapunovSpec& V, double lambda,
                                            const std::vector<std::shared_ptr<const Grid>>& grids);

struct InvariantReport {
    bool pass = false;
    bool nonnegative_and_growing = false;  ///< (i)
    bool generator_to_minus_infinity = false;  ///< (ii)
    bool boundary_average = false;  ///< (iii) integral of V against mu(z) <= V(z)
    Point worst_z = Point::Zero();
    double worst_gap = 0.0;  ///< max over z of (integral - V(z))
    std::string message;
};

/// Checks the three invariant-measure conditions on radii up to r_max and
/// at `samples` boundary points.
InvariantReport verify_invariant_lyapunov(const LyapunovSpec& V, const BoundaryMeasureSpec& spec,
                                          const DomainSpec& domain, double r_max = 64.0, int samples = 64);

/// The modified function V~ = phi(|x|^2) and the constants of its
/// construction.
struct ModifiedLyapunov {
    LyapunovSpec spec;
    double M = 0.0;           ///< sup_z of the second moment of mu(z)
    double epsilon = 0.0;     ///< band width: S = {r0 < |x| < r0 (1 + epsilon)}
    double band_mass = 0.0;   ///< max_z mu(z, S)
    double s0 = 0.0;          ///< r0^2
    double s1 = 0.0;          ///< (r0 (1 + epsilon))^2
    int halvings = 0;

    double phi(double t) const;
    double dphi(double t) const;
    double ddphi(double t) const;
};

/// Builds V~ for the boundary measure: phi = M + 1 on the boundary, phi <= M + 1
/// on the band, phi(t) = t beyond it, C^2 via a quintic blend. Throws
/// DivergentIntegral if the second moment is infinite and NumericalError if
/// no band width is found within 20 halvings.
ModifiedLyapunov modify_lyapunov(const BoundaryMeasureSpec& spec, const DomainSpec& domain,
                                 const CoefficientField& coeff, int samples = 64);

struct ChainRow {
    Point z = Point::Zero();
    double integral = 0.0;      ///< integral of V~ against mu(z)
    double band_bound = 0.0;    ///< (M + 1) mu(z, S) + M
    double uniform_bound = 0.0;  ///< (1 + M) / (1 + 2M) + M
    double value = 0.0;         ///< V~(z) = M + 1
    bool pass = false;
};

/// Evaluates the inequality chain at `samples` boundary points.
std::vector<ChainRow> verify_modified_chain(const ModifiedLyapunov& mod, const BoundaryMeasureSpec& spec,
                                            const DomainSpec& domain, int samples = 64);

}  // namespace feller
