#include "feller/measure.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numbers>
#include <ostream>
#include <stdexcept>

namespace feller {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

double side_of(const Point& z) { return z[0] >= 0.0 ? 1.0 : -1.0; }

double gk(const std::function<double(double)>& g, double a, double b) {
    using boost::math::quadrature::gauss_kronrod;
    return gauss_kronrod<double, 31>::integrate(g, a, b, 12, 1e-11);
}

double power_tail_cdf(const PowerTailDensity& p, int dim, double r) {
    if (r <= p.r_inner) return 0.0;
    if (!std::isfinite(r)) return 1.0;
    return 1.0 - std::pow(r / p.r_inner, -(p.exponent - dim));
}

}  // namespace

BoundaryMeasureSpec BoundaryMeasureSpec::dirac(const Point& x, int dimension) {
    return BoundaryMeasureSpec(AtomicMeasure{{Atom{AtomPlacement::fixed, x, 1.0, 1.0}}}, dimension);
}

BoundaryMeasureSpec BoundaryMeasureSpec::radial_dirac(double factor, int dimension) {
    return BoundaryMeasureSpec(
        AtomicMeasure{{Atom{AtomPlacement::radial, Point::Zero(), factor, 1.0}}}, dimension);
}

bool BoundaryMeasureSpec::z_independent(const DomainSpec& domain) const {
    return std::visit(overloaded{
                          [](const AtomicMeasure& m) {
                              return std::all_of(m.atoms.begin(), m.atoms.end(), [](const Atom& a) {
                                  return a.placement == AtomPlacement::fixed;
                              });
                          },
                          [&](const auto&) { return domain.dimension == 2; },
                      },
                      kind_);
}

void BoundaryMeasureSpec::validate(const DomainSpec& domain) const {
    if (dimension_ != domain.dimension)
        throw std::invalid_argument("measure dimension does not match the domain");
    std::visit(overloaded{
                   [&](const AtomicMeasure& m) {
                       if (m.atoms.empty()) throw std::invalid_argument("atomic measure has no atoms");
                       double total = 0.0;
                       for (const Atom& a : m.atoms) {
                           if (!(a.weight >= 0.0)) throw std::invalid_argument("negative atom weight");
                           total += a.weight;
                       }
                       if (std::abs(total - 1.0) > 1e-12)
                           throw std::invalid_argument("atom weights must sum to 1");
                       for (const Point& z : domain.boundary_samples(720))
                           for (const auto& [x, w] : atoms_at(z))
                               if (!domain.contains(x))
                                   throw std::invalid_argument("atom lies outside the open domain");
                   },
                   [&](const ShellDensity& s) {
                       if (!(s.r_inner >= domain.radius) || !(s.r_outer > s.r_inner) ||
                           !std::isfinite(s.r_outer))
                           throw std::invalid_argument("shell density needs radius <= r_inner < r_outer");
                   },
                   [&](const PowerTailDensity& p) {
                       if (!(p.r_inner >= domain.radius))
                           throw std::invalid_argument("power-tail density needs r_inner >= radius");
                       if (!(p.exponent > domain.dimension))
                           throw std::invalid_argument("power-tail exponent must exceed the dimension");
                   },
               },
               kind_);
}

std::vector<WeightedPoint> BoundaryMeasureSpec::atoms_at(const Point& z) const {
    std::vector<WeightedPoint> out;
    if (const auto* m = std::get_if<AtomicMeasure>(&kind_)) {
        for (const Atom& a : m->atoms)
            out.emplace_back(a.placement == AtomPlacement::fixed ? a.location : Point(a.factor * z), a.weight);
    }
    return out;
}

double BoundaryMeasureSpec::density(const Point& z, const Point& x) const {
    const int d = dimension_;
    const double r = x.norm();
    if (d == 1 && x[0] * side_of(z) <= 0.0) return 0.0;
    return std::visit(overloaded{
                          [](const AtomicMeasure&) { return 0.0; },
                          [&](const ShellDensity& s) {
                              if (r <= s.r_inner || r >= s.r_outer) return 0.0;
                              if (d == 1) return 1.0 / (s.r_outer - s.r_inner);
                              return 1.0 / (std::numbers::pi * (s.r_outer * s.r_outer - s.r_inner * s.r_inner));
                          },
                          [&](const PowerTailDensity& p) {
                              if (r <= p.r_inner) return 0.0;
                              const double k = p.exponent - d;
                              const double norm = d == 1 ? k * std::pow(p.r_inner, k)
                                                         : k * std::pow(p.r_inner, k) / (2.0 * std::numbers::pi);
                              return norm * std::pow(r, -p.exponent);
                          },
                      },
                      kind_);
}

double BoundaryMeasureSpec::mass_between(const Point& z, double r_lo, double r_hi) const {
    const int d = dimension_;
    return std::visit(
        overloaded{
            [&](const AtomicMeasure&) {
                double m = 0.0;
                for (const auto& [x, w] : atoms_at(z)) {
                    const double r = x.norm();
                    if (r >= r_lo && r < r_hi) m += w;
                }
                return m;
            },
            [&](const ShellDensity& s) {
                const double lo = std::max(r_lo, s.r_inner);
                const double hi = std::min(r_hi, s.r_outer);
                if (hi <= lo) return 0.0;
                if (d == 1) return (hi - lo) / (s.r_outer - s.r_inner);
                return (hi * hi - lo * lo) / (s.r_outer * s.r_outer - s.r_inner * s.r_inner);
            },
            [&](const PowerTailDensity& p) {
                if (r_hi <= r_lo) return 0.0;
                return power_tail_cdf(p, d, r_hi) - power_tail_cdf(p, d, r_lo);
            },
        },
        kind_);
}

double BoundaryMeasureSpec::integrate(const Point& z, const std::function<double(const Point&)>& f) const {
    if (is_atomic()) {
        double s = 0.0;
        for (const auto& [x, w] : atoms_at(z)) s += w * f(x);
        return s;
    }
    const int d = dimension_;
    const double side = side_of(z);
    // Integral of f * density over a <= |x| <= b.
    auto shell = [&](double a, double b) {
        if (d == 1) {
            return gk([&](double r) {
                const Point x(side * r, 0.0);
                return f(x) * density(z, x);
            }, a, b);
        }
        return gk([&](double r) {
            const double angular = gk([&](double theta) {
                const Point x(r * std::cos(theta), r * std::sin(theta));
                return f(x);
            }, 0.0, 2.0 * std::numbers::pi);
            return r * angular * density(z, Point(r, 0.0));
        }, a, b);
    };
    if (const auto* s = std::get_if<ShellDensity>(&kind_)) return shell(s->r_inner, s->r_outer);

    // Power tail: integrate over doubling shells and extrapolate the
    // geometric tail; increments that stop shrinking mean divergence.
    const auto& p = std::get<PowerTailDensity>(kind_);
    double total = 0.0;
    double prev = std::numeric_limits<double>::quiet_NaN();
    double prev_ratio = std::numeric_limits<double>::quiet_NaN();
    int negligible = 0;
    int non_decaying = 0;
    double r = p.r_inner;
    for (int k = 0; k < 600; ++k, r *= 2.0) {
        const double delta = shell(r, 2.0 * r);
        total += delta;
        if (!std::isfinite(total)) throw DivergentIntegral("integral against mu(z) is not finite");
        if (std::abs(delta) <= 1e-15 * std::max(std::abs(total), 1e-300)) {
            if (++negligible >= 3) return total;
        } else {
            negligible = 0;
        }
        if (k >= 1 && prev != 0.0 && std::isfinite(prev)) {
            const double ratio = delta / prev;
            if (ratio >= 1.0 - 1e-9) {
                if (++non_decaying >= 6)
                    throw DivergentIntegral("integral against mu(z) diverges (tail increments do not decay)");
            } else {
                non_decaying = 0;
            }
            if (k >= 4 && ratio > 0.0 && ratio < 1.0 - 1e-6 && std::abs(ratio - prev_ratio) < 1e-3) {
                const double tail = delta * ratio / (1.0 - ratio);
                if (std::abs(tail) <= 1e-12 * std::abs(total)) return total + tail;
            }
            prev_ratio = ratio;
        }
        prev = delta;
    }
    throw DivergentIntegral("integral against mu(z) did not converge");
}

Point BoundaryMeasureSpec::sample(const Point& z, const std::function<double()>& uniform) const {
    const int d = dimension_;
    const double side = side_of(z);
    return std::visit(
        overloaded{
            [&](const AtomicMeasure&) {
                const auto atoms = atoms_at(z);
                const double u = uniform();
                double acc = 0.0;
                for (const auto& [x, w] : atoms) {
                    acc += w;
                    if (u < acc) return x;
                }
                return atoms.back().first;
            },
            [&](const ShellDensity& s) -> Point {
                if (d == 1) return Point(side * (s.r_inner + uniform() * (s.r_outer - s.r_inner)), 0.0);
                // Rejection against the uniform law on the bounding square.
                for (;;) {
                    const Point x((2.0 * uniform() - 1.0) * s.r_outer, (2.0 * uniform() - 1.0) * s.r_outer);
                    const double r = x.norm();
                    if (r > s.r_inner && r < s.r_outer) return x;
                }
            },
            [&](const PowerTailDensity& p) -> Point {
                const double u = 1.0 - uniform();
                const double r = p.r_inner * std::pow(u, -1.0 / (p.exponent - d));
                if (d == 1) return Point(side * r, 0.0);
                const double theta = 2.0 * std::numbers::pi * uniform();
                return Point(r * std::cos(theta), r * std::sin(theta));
            },
        },
        kind_);
}

double BoundaryMeasureSpec::support_radius(const DomainSpec& domain) const {
    return std::visit(overloaded{
                          [&](const AtomicMeasure& m) {
                              double r = 0.0;
                              for (const Atom& a : m.atoms)
                                  r = std::max(r, a.placement == AtomPlacement::fixed
                                                      ? a.location.norm()
                                                      : a.factor * domain.radius);
                              return r;
                          },
                          [](const ShellDensity& s) { return s.r_outer; },
                          [](const PowerTailDensity&) { return std::numeric_limits<double>::infinity(); },
                      },
                      kind_);
}

double WeightRow::mass() const {
    double m = 0.0;
    for (const auto& [node, w] : entries) m += w;
    return m;
}

std::vector<std::pair<std::size_t, double>> transfer_point(const Grid& grid, const Point& x) {
    const double h = grid.spacing();
    const int d = grid.dimension();
    auto split = [](double u, long& i, double& t) {
        i = static_cast<long>(std::floor(u));
        t = u - static_cast<double>(i);
        if (t < 1e-9) t = 0.0;
        if (t > 1.0 - 1e-9) {
            ++i;
            t = 0.0;
        }
    };
    long i = 0, j = 0;
    double tx = 0.0, ty = 0.0;
    split(x[0] / h, i, tx);
    if (d == 2) split(x[1] / h, j, ty);

    std::vector<std::pair<std::size_t, double>> kept;
    double kept_sum = 0.0;
    double inner = 0.0;
    for (int b = 0; b < (d == 2 ? 2 : 1); ++b)
        for (int a = 0; a < 2; ++a) {
            const double w = (a ? tx : 1.0 - tx) * (d == 2 ? (b ? ty : 1.0 - ty) : 1.0);
            if (w == 0.0) continue;
            const long vi = i + a;
            const long vj = j + b;
            if (auto node = grid.lattice_node(vi, vj)) {
                kept.emplace_back(*node, w);
                kept_sum += w;
                continue;
            }
            const Point v(vi * h, vj * h);
            if (!grid.domain().contains(v) || grid.domain().boundary_distance(v) <= 1e-9 * h) inner += w;
        }
    if (kept.empty()) return kept;
    const double scale = (kept_sum + inner) / kept_sum;
    for (auto& e : kept) e.second *= scale;
    return kept;
}

namespace {

void accumulate(std::map<std::size_t, double>& acc, const Grid& grid, const Point& x, double mass,
                double& placed) {
    for (const auto& [node, w] : transfer_point(grid, x)) {
        acc[node] += mass * w;
        placed += mass * w;
    }
}

/// Visits the midpoints of the 4^d sub-cells of lattice cells meeting the
/// radial band [r_lo, r_hi], with the density mass of each sub-cell.
template <class Visit>
void sweep_density(const BoundaryMeasureSpec& spec, const Point& z, int d, double h, double r_lo, double r_hi,
                   Visit&& visit) {
    constexpr int sub = 4;
    if (d == 1) {
        const double side = z[0] >= 0.0 ? 1.0 : -1.0;
        const long k_lo = static_cast<long>(std::floor(r_lo / h)) - 1;
        const long k_hi = static_cast<long>(std::ceil(r_hi / h)) + 1;
        for (long k = k_lo; k <= k_hi; ++k)
            for (int s = 0; s < sub; ++s) {
                const Point x(side * (k + (s + 0.5) / sub) * h, 0.0);
                const double dens = std::abs(x[0]) <= r_hi ? spec.density(z, x) : 0.0;
                if (dens > 0.0) visit(x, dens * h / sub);
            }
        return;
    }
    const long k_hi = static_cast<long>(std::ceil(r_hi / h)) + 1;
    const double cell_diag = std::sqrt(2.0) * h;
    for (long l = -k_hi; l <= k_hi; ++l)
        for (long k = -k_hi; k <= k_hi; ++k) {
            const Point centre((k + 0.5) * h, (l + 0.5) * h);
            const double rc = centre.norm();
            if (rc + cell_diag < r_lo || rc - cell_diag > r_hi) continue;
            for (int sb = 0; sb < sub; ++sb)
                for (int sa = 0; sa < sub; ++sa) {
                    const Point x((k + (sa + 0.5) / sub) * h, (l + (sb + 0.5) / sub) * h);
                    const double dens = x.norm() <= r_hi ? spec.density(z, x) : 0.0;
                    if (dens > 0.0) visit(x, dens * h * h / (sub * sub));
                }
        }
}

WeightRow discretize_density(const BoundaryMeasureSpec& spec, const Point& z, const Grid& grid) {
    const double h = grid.spacing();
    const int d = grid.dimension();
    const double support = spec.support_radius(grid.domain());
    const double r_hi = std::min(support, grid.truncation() + 1.0 + h);
    double r_lo = grid.domain().radius;
    if (const auto* s = std::get_if<ShellDensity>(&spec.kind())) r_lo = s->r_inner;
    if (const auto* p = std::get_if<PowerTailDensity>(&spec.kind())) r_lo = p->r_inner;

    // Midpoint weights are scaled to reproduce the exact mass of a reference
    // band that does not depend on the truncation.
    const double r_ref = std::min(support, r_lo + 4.0);
    double quadrature = 0.0;
    sweep_density(spec, z, d, h, r_lo, r_ref, [&](const Point&, double m) { quadrature += m; });
    const double scale = quadrature > 0.0 ? spec.mass_between(z, r_lo, r_ref) / quadrature : 1.0;

    std::map<std::size_t, double> acc;
    double placed = 0.0;
    sweep_density(spec, z, d, h, r_lo, r_hi,
                  [&](const Point& x, double m) { accumulate(acc, grid, x, scale * m, placed); });
    WeightRow row;
    row.entries.assign(acc.begin(), acc.end());
    row.deficit = 1.0 - placed;
    return row;
}

}  // namespace

WeightRow discretize_measure(const BoundaryMeasureSpec& spec, std::size_t z_node, const Grid& grid) {
    if (z_node >= grid.size() || grid.kind(z_node) != NodeKind::physical_boundary)
        throw std::invalid_argument("discretize_measure needs a physical-boundary node");
    const Point& z = grid.node(z_node);
    if (!spec.is_atomic()) return discretize_density(spec, z, grid);

    std::map<std::size_t, double> acc;
    double placed = 0.0;
    double total = 0.0;
    for (const auto& [x, w] : spec.atoms_at(z)) {
        total += w;
        accumulate(acc, grid, x, w, placed);
    }
    WeightRow row;
    row.entries.assign(acc.begin(), acc.end());
    row.deficit = total - placed;
    return row;
}

TruncatedMeasure truncate_measure(const BoundaryMeasureSpec& spec, std::shared_ptr<const Grid> grid,
                                  Exec exec) {
    TruncatedMeasure tm;
    tm.grid = grid;
    tm.boundary_nodes = grid->nodes_of(NodeKind::physical_boundary);
    const std::size_t count = tm.boundary_nodes.size();
    tm.rows.resize(count);
    const int n = grid->truncation();

    std::optional<WeightRow> shared;
    if (count > 0 && spec.z_independent(grid->domain()))
        shared = discretize_measure(spec, tm.boundary_nodes.front(), *grid);

    auto build_row = [&](std::size_t k) {
        const std::size_t zn = tm.boundary_nodes[k];
        WeightRow raw = shared ? *shared : discretize_measure(spec, zn, *grid);
        const double rho_z = cutoff_rho(n, grid->node(zn));
        WeightRow row;
        for (const auto& [node, w] : raw.entries) {
            const double v = rho_z * cutoff_rho(n, grid->node(node)) * w;
            if (v > 0.0) row.entries.emplace_back(node, v);
        }
        row.deficit = 1.0 - row.mass();
        tm.rows[k] = std::move(row);
    };

    for_each_index(exec, count, build_row);
    return tm;
}

MonotoneReport check_monotone(const TruncatedMeasure& coarse, const TruncatedMeasure& fine) {
    const Grid& gc = *coarse.grid;
    const Grid& gf = *fine.grid;
    if (gc.spacing() != gf.spacing() || !(gc.domain() == gf.domain()))
        throw std::invalid_argument("grid mismatch: truncations use different lattices");
    std::map<std::size_t, std::size_t> fine_row;
    for (std::size_t k = 0; k < fine.boundary_nodes.size(); ++k) fine_row[fine.boundary_nodes[k]] = k;

    MonotoneReport rep;
    for (std::size_t k = 0; k < coarse.boundary_nodes.size(); ++k) {
        const auto zf = gf.find(gc.node(coarse.boundary_nodes[k]));
        if (!zf || !fine_row.count(*zf))
            throw std::invalid_argument("grid mismatch: boundary node missing from the finer grid");
        const WeightRow& rf = fine.rows[fine_row[*zf]];
        for (const auto& [node, w] : coarse.rows[k].entries) {
            const auto nf = gf.find(gc.node(node));
            if (!nf) throw std::invalid_argument("grid mismatch: node missing from the finer grid");
            auto it = std::lower_bound(rf.entries.begin(), rf.entries.end(), *nf,
                                       [](const auto& e, std::size_t v) { return e.first < v; });
            const double wf = (it != rf.entries.end() && it->first == *nf) ? it->second : 0.0;
            const double violation = w - wf;
            if (violation > rep.worst_violation) {
                rep.worst_violation = violation;
                rep.witness_row = k;
            }
        }
    }
    rep.pass = rep.worst_violation <= 1e-12;
    return rep;
}

ConcentrationReport concentration_check(const BoundaryMeasureSpec& spec, const DomainSpec& domain,
                                        int big_n, double epsilon, int samples) {
    if (!(epsilon > 0.0 && epsilon <= 1.0)) throw std::invalid_argument("epsilon must lie in (0, 1]");
    const auto zs = domain.boundary_samples(samples);
    auto min_mass = [&](int n, Point* witness) {
        double m = std::numeric_limits<double>::infinity();
        for (const Point& z : zs) {
            const double v = spec.mass_between(z, 0.0, n + 1.0);
            if (v < m) {
                m = v;
                if (witness) *witness = z;
            }
        }
        return m;
    };
    ConcentrationReport rep;
    rep.min_mass = min_mass(big_n, &rep.witness);
    rep.pass = rep.min_mass >= epsilon;
    for (int n = 1; n <= 1 << 20; n = n < 1024 ? n + 1 : 2 * n)
        if (min_mass(n, nullptr) >= 0.5) {
            rep.smallest_n_for_half = n;
            break;
        }
    return rep;
}

std::vector<double> boundary_continuity(const BoundaryMeasureSpec& spec, const DomainSpec& domain,
                                        const std::vector<std::function<double(const Point&)>>& dictionary,
                                        const std::vector<int>& sample_counts) {
    std::vector<double> out;
    for (int count : sample_counts) {
        if (domain.dimension == 1) {
            out.push_back(0.0);
            continue;
        }
        const auto zs = domain.boundary_samples(count);
        double worst = 0.0;
        for (const auto& f : dictionary) {
            std::vector<double> v;
            v.reserve(zs.size());
            for (const Point& z : zs) v.push_back(spec.integrate(z, f));
            for (std::size_t k = 0; k < v.size(); ++k)
                worst = std::max(worst, std::abs(v[k] - v[(k + 1) % v.size()]));
        }
        out.push_back(worst);
    }
    return out;
}

void write_truncated_measure_csv(std::ostream& os, const TruncatedMeasure& tm) {
    os << "z_node,node,weight\n";
    char buf[96];
    for (std::size_t k = 0; k < tm.boundary_nodes.size(); ++k)
        for (const auto& [node, w] : tm.rows[k].entries) {
            std::snprintf(buf, sizeof buf, "%zu,%zu,%.17g\n", tm.boundary_nodes[k], node, w);
            os << buf;
        }
}

}  // namespace feller
