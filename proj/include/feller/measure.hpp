#pragma once

#include "feller/common.hpp"
#include "feller/geometry.hpp"

#include <functional>
#include <iosfwd>
#include <memory>
#include <utility>
#include <variant>
#include <vector>

namespace feller {

enum class AtomPlacement {
    fixed,   ///< the atom sits at `location` for every boundary point
    radial,  ///< the atom sits at factor * z
};

struct Atom {
    AtomPlacement placement = AtomPlacement::fixed;
    Point location = Point::Zero();
    double factor = 1.0;
    double weight = 1.0;

    bool operator==(const Atom&) const = default;
};

struct AtomicMeasure {
    std::vector<Atom> atoms;
};

/// Uniform law on r_inner < |x| < r_outer. In one dimension the support is
/// taken on the same side of the origin as the boundary point z.
struct ShellDensity {
    double r_inner = 0.0;
    double r_outer = 0.0;
};

/// Density proportional to |x|^-exponent on |x| > r_inner (same side rule
/// in one dimension). Normalizable iff exponent > dimension.
struct PowerTailDensity {
    double r_inner = 0.0;
    double exponent = 0.0;
};

/// Raised when an integral against mu(z) diverges.
class DivergentIntegral : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using WeightedPoint = std::pair<Point, double>;

/// z -> mu(z, .), a probability measure on Omega for each boundary point z.
class BoundaryMeasureSpec {
public:
    using Kind = std::variant<AtomicMeasure, ShellDensity, PowerTailDensity>;

    BoundaryMeasureSpec() = default;
    /// `dimension` fixes the normalization of densities.
    BoundaryMeasureSpec(Kind kind, int dimension) : kind_(std::move(kind)), dimension_(dimension) {}

    static BoundaryMeasureSpec dirac(const Point& x, int dimension = 1);
    static BoundaryMeasureSpec radial_dirac(double factor, int dimension = 1);

    const Kind& kind() const noexcept { return kind_; }
    int dimension() const noexcept { return dimension_; }
    bool is_atomic() const noexcept { return std::holds_alternative<AtomicMeasure>(kind_); }
    /// True when mu(z) does not depend on z (used to cache discretizations).
    bool z_independent(const DomainSpec& domain) const;

    /// Checks unit mass and that all mass lies strictly inside Omega.
    void validate(const DomainSpec& domain) const;

    std::vector<WeightedPoint> atoms_at(const Point& z) const;
    double density(const Point& z, const Point& x) const;

    /// mu(z, {r_lo <= |x| < r_hi}), computed in closed form.
    double mass_between(const Point& z, double r_lo, double r_hi) const;

    /// Integral of f against mu(z); throws DivergentIntegral when the tail
    /// of a power-law density does not converge.
    double integrate(const Point& z, const std::function<double(const Point&)>& f) const;

    /// Draws from mu(z) given a source of uniform variates on [0, 1).
    Point sample(const Point& z, const std::function<double()>& uniform) const;

    /// Radius beyond which the measure carries no mass (infinity for tails).
    double support_radius(const DomainSpec& domain) const;

private:
    Kind kind_ = AtomicMeasure{};
    int dimension_ = 1;
};

/// Sparse weight row over grid nodes; entries sorted by node index.
struct WeightRow {
    std::vector<std::pair<std::size_t, double>> entries;
    double deficit = 0.0;  ///< mass that could not be placed on the grid

    double mass() const;
};

/// Multilinear transfer of a unit point mass at x onto the nodes of the
/// containing lattice cell. Vertices outside Omega hand their share to the
/// remaining vertices; vertices beyond the grid drop it. Returns the placed
/// (node, weight) pairs.
std::vector<std::pair<std::size_t, double>> transfer_point(const Grid& grid, const Point& x);

/// Discretizes mu(z) for the physical-boundary node `z_node` of `grid`.
/// Atoms use multilinear transfer; densities use midpoint quadrature on
/// 4^d sub-cells of every lattice cell.
WeightRow discretize_measure(const BoundaryMeasureSpec& spec, std::size_t z_node, const Grid& grid);

/// mu_n of the exhaustion: rho_n(z) * rho_n(x) * mu(z, dx), one row per
/// physical-boundary node; artificial-boundary rows are identically zero and
/// not stored.
struct TruncatedMeasure {
    std::shared_ptr<const Grid> grid;
    std::vector<std::size_t> boundary_nodes;
    std::vector<WeightRow> rows;

    double mass(std::size_t row) const { return rows[row].mass(); }
};

TruncatedMeasure truncate_measure(const BoundaryMeasureSpec& spec, std::shared_ptr<const Grid> grid,
                                  Exec exec = Exec::parallel);

struct MonotoneReport {
    bool pass = true;
    double worst_violation = 0.0;  ///< max of w_n - w_{n+1} over shared entries
    std::size_t witness_row = 0;
};

/// Entrywise w_n <= w_{n+1} + 1e-12 on shared nodes. Throws
/// std::invalid_argument when a node of the coarser truncation is missing
/// from the finer grid.
MonotoneReport check_monotone(const TruncatedMeasure& coarse, const TruncatedMeasure& fine);

struct ConcentrationReport {
    bool pass = false;
    double min_mass = 0.0;
    Point witness = Point::Zero();
    int smallest_n_for_half = -1;  ///< smallest N with mu(z, Omega_N) >= 1/2 everywhere
};

/// Checks mu(z, Omega_N) >= epsilon on `samples` boundary points.
ConcentrationReport concentration_check(const BoundaryMeasureSpec& spec, const DomainSpec& domain,
                                        int big_n, double epsilon, int samples = 720);

/// Max jump of z -> <f, mu(z)> between neighbouring boundary samples, for
/// each requested sample count (trivially zero in one dimension).
std::vector<double> boundary_continuity(const BoundaryMeasureSpec& spec, const DomainSpec& domain,
                                        const std::vector<std::function<double(const Point&)>>& dictionary,
                                        const std::vector<int>& sample_counts);

/// Sparse CSV: z_node,node,weight.
void write_truncated_measure_csv(std::ostream& os, const TruncatedMeasure& tm);

}  // namespace feller
