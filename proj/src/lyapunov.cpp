#include "feller/lyapunov.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace feller {

LyapunovSpec quadratic_lyapunov(const CoefficientField& coeff) {
    return {"|x|^2", [](const Point& x) { return x.squaredNorm(); },
            [coeff](const Point& x) { return 2.0 * drift_balance(coeff, x); }};
}

LyapunovSpec constant_lyapunov(double c) {
    return {"constant", [c](const Point&) { return c; }, [](const Point&) { return 0.0; }};
}

namespace {

/// Largest radius at which lambda V - AV < 0 on the grid, refined along the
/// ray through the worst node; the inner radius when nothing is violated.
std::optional<double> violation_radius(const LyapunovSpec& V, double lambda, const Grid& grid) {
    auto margin = [&](const Point& x) { return lambda * V.V(x) - V.AV(x); };
    const double outer = grid.truncation() + 1.0;
    double worst = -1.0;
    Point dir = Point::Zero();
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (grid.kind(i) == NodeKind::artificial_boundary) continue;
        const Point& x = grid.node(i);
        const double m = margin(x);
        const double scale = 1e-12 * std::max(1.0, std::abs(lambda * V.V(x)));
        if (m < -scale && x.norm() > worst) {
            worst = x.norm();
            dir = x / x.norm();
        }
    }
    if (worst < 0.0) return grid.domain().radius;
    const double h = grid.spacing();
    double lo = worst;
    double hi = worst;
    while (true) {
        hi += 0.25 * h;
        if (hi > outer) return std::nullopt;
        if (margin(hi * dir) >= 0.0) break;
        lo = hi;
    }
    for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (margin(mid * dir) >= 0.0 ? hi : lo) = mid;
    }
    return hi;
}

}  // namespace

UniquenessReport verify_uniqueness_lyapunov(const LyapunovSpec& V, double lambda,
                                            const std::vector<std::shared_ptr<const Grid>>& grids) {
    UniquenessReport rep;
    if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
    if (grids.empty()) throw std::invalid_argument("empty grid sequence");
    std::vector<std::optional<double>> radii;
    rep.generator_bounded = true;
    for (const auto& g : grids) {
        const double inner_shell = g->truncation();
        double shell_min = std::numeric_limits<double>::infinity();
        double gen_max = 0.0;
        for (std::size_t i = 0; i < g->size(); ++i) {
            if (g->kind(i) == NodeKind::artificial_boundary) continue;
            const Point& x = g->node(i);
            const double av = V.AV(x);
            if (!std::isfinite(av)) rep.generator_bounded = false;
            gen_max = std::max(gen_max, std::abs(av));
            if (x.norm() >= inner_shell) shell_min = std::min(shell_min, V.V(x));
        }
        rep.shell_minima.push_back(shell_min);
        rep.generator_max.push_back(gen_max);
        radii.push_back(violation_radius(V, lambda, *g));
    }
    rep.grows = grids.size() >= 2;
    for (std::size_t k = 1; k < rep.shell_minima.size(); ++k) {
        const double a = rep.shell_minima[k - 1];
        const double b = rep.shell_minima[k];
        if (!(b > a + 1e-12 * std::max(1.0, std::abs(a)))) rep.grows = false;
    }
    rep.radius = radii.back();
    rep.stable = rep.radius.has_value();
    if (rep.stable && radii.size() >= 2) {
        const auto& prev = radii[radii.size() - 2];
        rep.stable = prev.has_value() && std::abs(*prev - *rep.radius) <= grids.back()->spacing();
    }
    rep.pass = rep.grows && rep.generator_bounded && rep.stable;
    std::ostringstream msg;
    if (!rep.grows) msg << "V does not grow across truncations; ";
    if (!rep.generator_bounded) msg << "AV is not finite on a truncation; ";
    if (!rep.radius) msg << "lambda V - AV changes sign up to the largest truncation; ";
    else if (!rep.stable) msg << "violation radius moves with the truncation; ";
    rep.message = msg.str();
    return rep;
}

InvariantReport verify_invariant_lyapunov(const LyapunovSpec& V, const BoundaryMeasureSpec& spec,
                                          const DomainSpec& domain, double r_max, int samples) {
    InvariantReport rep;
    const int d = domain.dimension;
    const double r_min = domain.radius;
    bool nonneg = true;
    const int directions = d == 1 ? 1 : 16;
    for (int k = 0; k <= 256 && nonneg; ++k) {
        const double r = r_min + (r_max - r_min) * k / 256.0;
        for (int j = 0; j < directions; ++j) {
            const double theta = 2.0 * std::numbers::pi * j / directions;
            const Point x = d == 1 ? Point(r, 0.0) : Point(r * std::cos(theta), r * std::sin(theta));
            if (V.V(x) < 0.0) nonneg = false;
        }
    }
    rep.nonnegative_and_growing = nonneg && radial_trend(V.V, d, r_min, r_max).diverges_up;
    rep.generator_to_minus_infinity = radial_trend(V.AV, d, r_min, r_max).diverges_down;

    std::ostringstream msg;
    rep.boundary_average = true;
    rep.worst_gap = -std::numeric_limits<double>::infinity();
    try {
        for (const Point& z : domain.boundary_samples(samples)) {
            const double v0 = spec.integrate(z, V.V);
            const double gap = v0 - V.V(z);
            if (gap > rep.worst_gap) {
                rep.worst_gap = gap;
                rep.worst_z = z;
            }
            if (gap > 1e-12 * std::max(1.0, std::abs(V.V(z)))) rep.boundary_average = false;
        }
    } catch (const DivergentIntegral& e) {
        rep.boundary_average = false;
        rep.worst_gap = std::numeric_limits<double>::infinity();
        msg << "V is not integrable against mu(z): " << e.what() << "; ";
    }
    if (!rep.nonnegative_and_growing) msg << "(i) V is not nonnegative and unbounded; ";
    if (!rep.generator_to_minus_infinity) msg << "(ii) AV does not tend to -infinity; ";
    if (!rep.boundary_average && std::isfinite(rep.worst_gap))
        msg << "(iii) integral of V exceeds V(z) by " << rep.worst_gap << "; ";
    rep.message = msg.str();
    rep.pass = rep.nonnegative_and_growing && rep.generator_to_minus_infinity && rep.boundary_average;
    return rep;
}

namespace {

double smooth(double s) { return s * s * s * (10.0 + s * (-15.0 + 6.0 * s)); }
double dsmooth(double s) { return 30.0 * s * s * (1.0 - s) * (1.0 - s); }
double ddsmooth(double s) { return 60.0 * s * (1.0 - s) * (1.0 - 2.0 * s); }

}  // namespace

double ModifiedLyapunov::phi(double t) const {
    if (t >= s1) return t;
    const double s = std::clamp((t - s0) / (s1 - s0), 0.0, 1.0);
    const double S = smooth(s);
    return (1.0 - S) * (M + 1.0) + S * t;
}

double ModifiedLyapunov::dphi(double t) const {
    if (t >= s1) return 1.0;
    if (t <= s0) return 0.0;
    const double w = s1 - s0;
    const double s = (t - s0) / w;
    return smooth(s) + dsmooth(s) * (t - M - 1.0) / w;
}

double ModifiedLyapunov::ddphi(double t) const {
    if (t >= s1 || t <= s0) return 0.0;
    const double w = s1 - s0;
    const double s = (t - s0) / w;
    return 2.0 * dsmooth(s) / w + ddsmooth(s) * (t - M - 1.0) / (w * w);
}

ModifiedLyapunov modify_lyapunov(const BoundaryMeasureSpec& spec, const DomainSpec& domain,
                                 const CoefficientField& coeff, int samples) {
    ModifiedLyapunov mod;
    const auto zs = domain.boundary_samples(samples);
    auto square = [](const Point& x) { return x.squaredNorm(); };
    for (const Point& z : zs) mod.M = std::max(mod.M, spec.integrate(z, square));
    if (!std::isfinite(mod.M)) throw DivergentIntegral("second moment of mu(z) is infinite");

    const double r0 = domain.radius;
    const double target = 1.0 / (1.0 + 2.0 * mod.M);
    double eps = 0.5;
    bool found = false;
    for (int k = 0; k <= 20; ++k) {
        double band = 0.0;
        for (const Point& z : zs) band = std::max(band, spec.mass_between(z, r0, r0 * (1.0 + eps)));
        const double outer_sq = r0 * (1.0 + eps) * r0 * (1.0 + eps);
        if (band <= target && outer_sq <= mod.M + 1.0) {
            mod.band_mass = band;
            mod.halvings = k;
            found = true;
            break;
        }
        eps *= 0.5;
    }
    if (!found) throw NumericalError("no band width found within 20 halvings");
    mod.epsilon = eps;
    mod.s0 = r0 * r0;
    mod.s1 = r0 * (1.0 + eps) * r0 * (1.0 + eps);

    const int d = domain.dimension;
    auto self = std::make_shared<ModifiedLyapunov>(mod);
    mod.spec.name = "modified |x|^2";
    mod.spec.V = [self](const Point& x) { return self->phi(x.squaredNorm()); };
    mod.spec.AV = [self, coeff, d](const Point& x) {
        const double t = x.squaredNorm();
        const Matrix2 a = coeff.diffusion(x);
        const Point b = coeff.drift(x);
        double xax, tr, bx;
        if (d == 1) {
            xax = a(0, 0) * x[0] * x[0];
            tr = a(0, 0);
            bx = b[0] * x[0];
        } else {
            xax = x.dot(a * x);
            tr = a.trace();
            bx = b.dot(x);
        }
        return 4.0 * self->ddphi(t) * xax + 2.0 * self->dphi(t) * (tr + bx);
    };
    return mod;
}

std::vector<ChainRow> verify_modified_chain(const ModifiedLyapunov& mod, const BoundaryMeasureSpec& spec,
                                            const DomainSpec& domain, int samples) {
    std::vector<ChainRow> rows;
    const double r0 = domain.radius;
    for (const Point& z : domain.boundary_samples(samples)) {
        ChainRow row;
        row.z = z;
        row.integral = spec.integrate(z, mod.spec.V);
        row.band_bound = (mod.M + 1.0) * spec.mass_between(z, r0, r0 * (1.0 + mod.epsilon)) + mod.M;
        row.uniform_bound = (1.0 + mod.M) / (1.0 + 2.0 * mod.M) + mod.M;
        row.value = mod.spec.V(z);
        const double slack = 1e-12 * (mod.M + 1.0);
        row.pass = row.integral <= row.band_bound + slack && row.band_bound <= row.uniform_bound + slack &&
                   row.uniform_bound <= mod.M + 1.0 + slack && std::abs(row.value - (mod.M + 1.0)) <= slack;
        rows.push_back(row);
    }
    return rows;
}

}  // namespace feller
