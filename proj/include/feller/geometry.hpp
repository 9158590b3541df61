#pragma once

#include "feller/common.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <utility>
#include <vector>

namespace feller {

enum class DomainKind {
    half_line,      ///< (c, inf) in one dimension
    ball_exterior,  ///< R^d minus the closed ball of radius r0, d in {1, 2}
};

/// An unbounded domain with compact boundary.
struct DomainSpec {
    DomainKind kind = DomainKind::half_line;
    int dimension = 1;
    double radius = 1.0;  ///< c for the half-line, r0 for the ball exterior

    static DomainSpec half_line(double c);
    static DomainSpec ball_exterior(int dimension, double r0);

    void validate() const;

    bool contains(const Point& x) const;
    double boundary_distance(const Point& x) const;
    Point project_to_boundary(const Point& x) const;

    /// Smallest s in [0, 1] at which x + s (y - x) leaves the open set,
    /// or nullopt if the closed segment stays inside.
    std::optional<double> first_exit(const Point& x, const Point& y) const;

    /// Boundary points ordered by angle; the 1D boundary is returned in full.
    std::vector<Point> boundary_samples(int count) const;

    bool operator==(const DomainSpec&) const = default;
};

enum class NodeKind : std::uint8_t { interior, physical_boundary, artificial_boundary };

const char* to_string(NodeKind kind);

/// One arm of a (possibly shortened) five-point stencil.
struct Arm {
    std::size_t node = 0;
    double length = 0.0;
};

/// Arm slots: 0 = -x, 1 = +x, 2 = -y, 3 = +y.
using Stencil = std::array<Arm, 4>;

/// Uniform tensor grid discretizing Omega_n = Omega cut with B_{n+1}(0).
///
/// Interior nodes are lattice points strictly inside Omega with |x| < n+1-h/2.
/// Physical-boundary nodes sit exactly on the boundary, where a lattice arm
/// crosses it (Shortley-Weller). Artificial-boundary nodes are the lattice
/// neighbours of interior nodes beyond the truncation sphere.
class Grid {
public:
    const DomainSpec& domain() const noexcept { return domain_; }
    int dimension() const noexcept { return domain_.dimension; }
    int truncation() const noexcept { return n_; }
    double spacing() const noexcept { return h_; }
    double window_radius() const noexcept { return window_radius_; }
    std::size_t size() const noexcept { return nodes_.size(); }

    const Point& node(std::size_t i) const { return nodes_[i]; }
    const std::vector<Point>& nodes() const noexcept { return nodes_; }
    NodeKind kind(std::size_t i) const { return kinds_[i]; }
    const std::vector<NodeKind>& kinds() const noexcept { return kinds_; }

    /// Stencil arms; only meaningful for interior nodes.
    const Stencil& arms(std::size_t i) const { return arms_[i]; }

    /// Node at lattice coordinates (i*h, j*h), if it belongs to the grid.
    std::optional<std::size_t> lattice_node(long i, long j) const;

    /// Node with exactly these coordinates (interior, boundary or artificial).
    std::optional<std::size_t> find(const Point& x) const;

    bool in_window(std::size_t i) const;
    std::vector<std::size_t> window_nodes() const;
    std::vector<std::size_t> nodes_of(NodeKind kind) const;

    /// Node closest to x among interior nodes.
    std::size_t nearest_interior(const Point& x) const;

    friend Grid build_exhaustion(const DomainSpec&, int, double, std::optional<double>);

private:
    using Key = std::pair<long long, long long>;
    Key key_of(const Point& x) const;

    DomainSpec domain_;
    int n_ = 0;
    double h_ = 0.0;
    double window_radius_ = 0.0;
    std::vector<Point> nodes_;
    std::vector<NodeKind> kinds_;
    std::vector<Stencil> arms_;
    std::map<std::pair<long, long>, std::size_t> lattice_;
    std::map<Key, std::size_t> by_coordinate_;
};

/// Builds the grid for Omega_n. The window defaults to the whole truncation.
/// Throws std::invalid_argument for n+1 <= inner radius (empty truncation)
/// or a non-positive spacing.
Grid build_exhaustion(const DomainSpec& domain, int n, double h,
                      std::optional<double> window_radius = std::nullopt);

/// Piecewise-linear radial cutoff: 1 on B_n, 0 outside B_{n+1}.
double cutoff_rho(int n, const Point& x);

void write_grid_csv(std::ostream& os, const Grid& grid);

}  // namespace feller
