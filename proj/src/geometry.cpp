#include "feller/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace feller {

DomainSpec DomainSpec::half_line(double c) {
    DomainSpec d{DomainKind::half_line, 1, c};
    d.validate();
    return d;
}

DomainSpec DomainSpec::ball_exterior(int dimension, double r0) {
    DomainSpec d{DomainKind::ball_exterior, dimension, r0};
    d.validate();
    return d;
}

void DomainSpec::validate() const {
    if (!(radius > 0.0) || !std::isfinite(radius))
        throw std::invalid_argument("domain radius must be positive and finite");
    if (dimension != 1 && dimension != 2)
        throw std::invalid_argument("only dimensions 1 and 2 are supported");
    if (kind == DomainKind::half_line && dimension != 1)
        throw std::invalid_argument("the half-line domain is one-dimensional");
}

bool DomainSpec::contains(const Point& x) const {
    if (kind == DomainKind::half_line) return x[0] > radius;
    return x.norm() > radius;
}

double DomainSpec::boundary_distance(const Point& x) const {
    if (kind == DomainKind::half_line) return std::abs(x[0] - radius);
    return std::abs(x.norm() - radius);
}

Point DomainSpec::project_to_boundary(const Point& x) const {
    if (kind == DomainKind::half_line) return Point(radius, 0.0);
    const double r = x.norm();
    if (r == 0.0) return Point(radius, 0.0);
    Point z = x * (radius / r);
    if (dimension == 1) z[1] = 0.0;
    return z;
}

std::optional<double> DomainSpec::first_exit(const Point& x, const Point& y) const {
    if (kind == DomainKind::half_line) {
        if (y[0] > radius) return std::nullopt;
        const double span = x[0] - y[0];
        if (span <= 0.0) return 0.0;
        return std::clamp((x[0] - radius) / span, 0.0, 1.0);
    }
    const Point d = y - x;
    const double a = d.squaredNorm();
    if (a == 0.0) return contains(x) ? std::nullopt : std::optional<double>(0.0);
    const double b = 2.0 * x.dot(d);
    const double c = x.squaredNorm() - radius * radius;
    if (c <= 0.0) return 0.0;
    const double disc = b * b - 4.0 * a * c;
    if (disc < 0.0) return std::nullopt;
    // Numerically stable smaller root.
    const double q = -0.5 * (b + std::copysign(std::sqrt(disc), b));
    double s1 = q / a;
    double s2 = c / q;
    if (s1 > s2) std::swap(s1, s2);
    if (s1 >= 0.0 && s1 <= 1.0) return s1;
    // The far endpoint sits on the sphere up to roundoff.
    if (s1 > 1.0 && s1 <= 1.0 + 1e-12) return 1.0;
    return std::nullopt;
}

std::vector<Point> DomainSpec::boundary_samples(int count) const {
    if (kind == DomainKind::half_line) return {Point(radius, 0.0)};
    if (dimension == 1) return {Point(-radius, 0.0), Point(radius, 0.0)};
    std::vector<Point> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int k = 0; k < count; ++k) {
        const double theta = 2.0 * std::numbers::pi * k / count;
        out.emplace_back(radius * std::cos(theta), radius * std::sin(theta));
    }
    return out;
}

const char* to_string(NodeKind kind) {
    switch (kind) {
        case NodeKind::interior: return "interior";
        case NodeKind::physical_boundary: return "physical-boundary";
        case NodeKind::artificial_boundary: return "artificial-boundary";
    }
    return "?";
}

Grid::Key Grid::key_of(const Point& x) const {
    constexpr double scale = 1 << 20;
    return {std::llround(x[0] / h_ * scale), std::llround(x[1] / h_ * scale)};
}

std::optional<std::size_t> Grid::lattice_node(long i, long j) const {
    auto it = lattice_.find({i, j});
    if (it == lattice_.end()) return std::nullopt;
    return it->second;
}

std::optional<std::size_t> Grid::find(const Point& x) const {
    auto it = by_coordinate_.find(key_of(x));
    if (it == by_coordinate_.end()) return std::nullopt;
    return it->second;
}

bool Grid::in_window(std::size_t i) const {
    return nodes_[i].norm() <= window_radius_ + 1e-9 * h_;
}

std::vector<std::size_t> Grid::window_nodes() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < nodes_.size(); ++i)
        if (in_window(i)) out.push_back(i);
    return out;
}

std::vector<std::size_t> Grid::nodes_of(NodeKind kind) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < kinds_.size(); ++i)
        if (kinds_[i] == kind) out.push_back(i);
    return out;
}

std::size_t Grid::nearest_interior(const Point& x) const {
    std::size_t best = nodes_.size();
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        if (kinds_[i] != NodeKind::interior) continue;
        const double d = (nodes_[i] - x).norm();
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    if (best == nodes_.size()) throw std::invalid_argument("grid has no interior nodes");
    return best;
}

namespace {

struct RawNode {
    Point x;
    NodeKind kind;
    Stencil arms{};
};

}  // namespace

Grid build_exhaustion(const DomainSpec& domain, int n, double h,
                      std::optional<double> window_radius) {
    domain.validate();
    if (!(h > 0.0) || !std::isfinite(h))
        throw std::invalid_argument("non-positive spacing");
    const double outer = n + 1.0;
    if (outer <= domain.radius)
        throw std::invalid_argument("empty truncation: n+1 does not exceed the inner radius");
    if (n < 1) throw std::invalid_argument("truncation index must be at least 1");

    const double snap = 1e-9 * h;
    const double interior_limit = outer - 0.5 * h - snap;
    auto lattice_point = [&](long i, long j) { return Point(i * h, j * h); };
    auto is_interior = [&](const Point& p) {
        return domain.contains(p) && domain.boundary_distance(p) > snap &&
               p.norm() < interior_limit;
    };

    const long reach = static_cast<long>(std::ceil(outer / h)) + 2;
    long i_lo = -reach;
    if (domain.kind == DomainKind::half_line)
        i_lo = std::max(i_lo, static_cast<long>(std::floor(domain.radius / h)) - 1);
    const long j_reach = domain.dimension == 2 ? reach : 0;

    Grid grid;
    grid.domain_ = domain;
    grid.n_ = n;
    grid.h_ = h;
    grid.window_radius_ = window_radius.value_or(outer);

    std::vector<RawNode> raw;
    std::map<std::pair<long, long>, std::size_t> lattice;
    std::map<Grid::Key, std::size_t> boundary_index;

    for (long j = -j_reach; j <= j_reach; ++j)
        for (long i = i_lo; i <= reach; ++i) {
            const Point p = lattice_point(i, j);
            if (!is_interior(p)) continue;
            lattice[{i, j}] = raw.size();
            raw.push_back({p, NodeKind::interior, {}});
        }
    if (raw.empty())
        throw std::invalid_argument("empty truncation: no interior lattice points");

    const std::array<std::array<long, 2>, 4> dirs{{{-1, 0}, {1, 0}, {0, -1}, {0, 1}}};
    const int slots = 2 * domain.dimension;
    // Interior entries are keyed by lattice position, not by index order.
    std::vector<std::pair<std::pair<long, long>, std::size_t>> interior_list(lattice.begin(),
                                                                             lattice.end());
    for (const auto& [ij, idx] : interior_list) {
        const Point p = raw[idx].x;
        for (int s = 0; s < slots; ++s) {
            const long qi = ij.first + dirs[s][0];
            const long qj = ij.second + dirs[s][1];
            const Point q = lattice_point(qi, qj);
            Arm arm{};
            if (auto exit = domain.first_exit(p, q)) {
                const Point z = domain.project_to_boundary(p + *exit * (q - p));
                const Grid::Key key = grid.key_of(z);
                auto it = boundary_index.find(key);
                std::size_t zi;
                if (it == boundary_index.end()) {
                    zi = raw.size();
                    boundary_index[key] = zi;
                    raw.push_back({z, NodeKind::physical_boundary, {}});
                } else {
                    zi = it->second;
                }
                arm = {zi, (z - p).norm()};
            } else if (auto it = lattice.find({qi, qj}); it != lattice.end()) {
                arm = {it->second, h};
            } else if (domain.boundary_distance(q) <= snap) {
                const Point z = domain.project_to_boundary(q);
                const Grid::Key key = grid.key_of(z);
                auto bt = boundary_index.find(key);
                std::size_t zi;
                if (bt == boundary_index.end()) {
                    zi = raw.size();
                    boundary_index[key] = zi;
                    raw.push_back({z, NodeKind::physical_boundary, {}});
                } else {
                    zi = bt->second;
                }
                arm = {zi, (z - p).norm()};
            } else {
                const std::size_t qa = raw.size();
                lattice[{qi, qj}] = qa;
                raw.push_back({q, NodeKind::artificial_boundary, {}});
                arm = {qa, h};
            }
            if (!(arm.length > 0.0))
                throw std::logic_error("degenerate stencil arm in grid construction");
            raw[idx].arms[s] = arm;
        }
    }

    // Sort by (y, x) so that node order is geometric and stable across n.
    std::vector<std::size_t> order(raw.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (raw[a].x[1] != raw[b].x[1]) return raw[a].x[1] < raw[b].x[1];
        return raw[a].x[0] < raw[b].x[0];
    });
    std::vector<std::size_t> new_index(raw.size());
    for (std::size_t k = 0; k < order.size(); ++k) new_index[order[k]] = k;

    grid.nodes_.resize(raw.size());
    grid.kinds_.resize(raw.size());
    grid.arms_.resize(raw.size());
    for (std::size_t k = 0; k < order.size(); ++k) {
        const RawNode& r = raw[order[k]];
        grid.nodes_[k] = r.x;
        grid.kinds_[k] = r.kind;
        Stencil st = r.arms;
        if (r.kind == NodeKind::interior)
            for (int s = 0; s < slots; ++s) st[s].node = new_index[st[s].node];
        grid.arms_[k] = st;
    }
    for (const auto& [ij, idx] : lattice) grid.lattice_[ij] = new_index[idx];
    for (std::size_t k = 0; k < grid.nodes_.size(); ++k) {
        auto [it, inserted] = grid.by_coordinate_.emplace(grid.key_of(grid.nodes_[k]), k);
        if (!inserted) throw std::logic_error("duplicate node coordinates in grid construction");
    }
    return grid;
}

double cutoff_rho(int n, const Point& x) {
    return std::clamp(n + 1.0 - x.norm(), 0.0, 1.0);
}

void write_grid_csv(std::ostream& os, const Grid& grid) {
    os << (grid.dimension() == 1 ? "node,x,class\n" : "node,x,y,class\n");
    char buf[96];
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const Point& p = grid.node(i);
        if (grid.dimension() == 1)
            std::snprintf(buf, sizeof buf, "%zu,%.17g,", i, p[0]);
        else
            std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,", i, p[0], p[1]);
        os << buf << to_string(grid.kind(i)) << '\n';
    }
}

}  // namespace feller
