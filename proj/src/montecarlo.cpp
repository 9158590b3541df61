#include "feller/montecarlo.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

namespace feller {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
}

}  // namespace

Philox4x32::Philox4x32(std::uint64_t key, std::uint64_t stream)
    : key_{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)},
      counter_{0u, 0u, static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)} {}

Philox4x32::Block Philox4x32::encrypt(Block c, Key k) {
    for (int round = 0; round < 10; ++round) {
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kMul0, c[0], hi0, lo0);
        mulhilo(kMul1, c[2], hi1, lo1);
        c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
        k[0] += kWeyl0;
        k[1] += kWeyl1;
    }
    return c;
}

Philox4x32::result_type Philox4x32::operator()() {
    if (used_ == 4) {
        buffer_ = encrypt(counter_, key_);
        if (++counter_[0] == 0) ++counter_[1];
        used_ = 0;
    }
    return buffer_[used_++];
}

double Philox4x32::uniform() {
    const std::uint64_t hi = (*this)();
    const std::uint64_t lo = (*this)();
    return static_cast<double>(((hi << 32) | lo) >> 11) * 0x1.0p-53;
}

namespace {

/// Symmetric square root of 2a, allowing a semidefinite a.
Matrix2 diffusion_factor(const Matrix2& a, const Point& x, int d) {
    Matrix2 s = Matrix2::Zero();
    if (d == 1) {
        const double m = 2.0 * a(0, 0);
        if (m < -1e-14) {
            std::ostringstream msg;
            msg << "diffusion is not positive semidefinite at x = " << x[0];
            throw NumericalError(msg.str());
        }
        s(0, 0) = std::sqrt(std::max(m, 0.0));
        return s;
    }
    const Matrix2 m = a + a.transpose();
    const double tr = m.trace();
    const double det = m.determinant();
    const double half = 0.5 * tr;
    const double lmin = half - std::sqrt(std::max(half * half - det, 0.0));
    if (lmin < -1e-14 * std::max(1.0, std::abs(tr))) {
        std::ostringstream msg;
        msg << "diffusion is not positive semidefinite at x = (" << x[0] << ", " << x[1] << ")";
        throw NumericalError(msg.str());
    }
    const double root_det = std::sqrt(std::max(det, 0.0));
    const double denom = std::sqrt(std::max(tr + 2.0 * root_det, 0.0));
    if (denom == 0.0) return s;
    return (m + root_det * Matrix2::Identity()) / denom;
}

struct PathStats {
    std::size_t hits = 0;
    double max_radius = 0.0;
    std::vector<ReturnEvent>* returns = nullptr;
    std::size_t max_returns = 0;
};

class Walker {
public:
    Walker(const CoefficientField& coeff, const DomainSpec& domain, const BoundaryMeasureSpec& spec, double dt)
        : coeff_(coeff), domain_(domain), spec_(spec), d_(domain.dimension), dt_(dt) {}

    void step(Point& x, Philox4x32& rng, std::normal_distribution<double>& normal, PathStats& stats) const {
        Matrix2 a = coeff_.diffusion(x);
        const double tr = d_ == 1 ? a(0, 0) : a.trace();
        const double reach = 3.0 * std::sqrt(2.0 * std::max(tr, 0.0) * dt_);
        const int sub = domain_.boundary_distance(x) < reach ? 10 : 1;
        const double h = dt_ / sub;
        const double sqrt_h = std::sqrt(h);
        for (int s = 0; s < sub; ++s) {
            if (s > 0) a = coeff_.diffusion(x);
            const Point b = coeff_.drift(x);
            Point xi(normal(rng), 0.0);
            if (d_ == 2) xi[1] = normal(rng);
            Point y = x + b * h + diffusion_factor(a, x, d_) * xi * sqrt_h;
            if (d_ == 1) y[1] = 0.0;
            if (!domain_.contains(y)) {
                const double t = domain_.first_exit(x, y).value_or(1.0);
                const Point z = domain_.project_to_boundary(x + t * (y - x));
                y = spec_.sample(z, [&rng] { return rng.uniform(); });
                ++stats.hits;
                if (stats.returns && stats.returns->size() < stats.max_returns) stats.returns->push_back({z, y});
            }
            x = y;
            stats.max_radius = std::max(stats.max_radius, x.norm());
        }
    }

private:
    const CoefficientField& coeff_;
    const DomainSpec& domain_;
    const BoundaryMeasureSpec& spec_;
    int d_;
    double dt_;
};

long steps_of(double t, double dt) {
    const double k = t / dt;
    const long n = std::lround(k);
    if (!(t >= 0.0) || std::abs(k - static_cast<double>(n)) > 1e-9 * std::max(1.0, k))
        throw std::invalid_argument("time must be a nonnegative integer multiple of dt");
    return n;
}

void check_start(const DomainSpec& domain, const Point& x0, double dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
    if (!domain.contains(x0)) throw std::invalid_argument("starting point must lie in the domain");
}

}  // namespace

std::vector<ParticleEnsemble> simulate_snapshots(const CoefficientField& coeff, const DomainSpec& domain,
                                                 const BoundaryMeasureSpec& spec, const Point& x0,
                                                 const std::vector<double>& times, const PathOptions& options) {
    check_start(domain, x0, options.dt);
    std::vector<long> steps;
    for (double t : times) {
        steps.push_back(steps_of(t, options.dt));
        if (steps.size() > 1 && steps.back() < steps[steps.size() - 2])
            throw std::invalid_argument("snapshot times must be nondecreasing");
    }
    const std::size_t n = options.particles;
    const std::size_t m = times.size();
    std::vector<Point> positions(n * m);
    std::vector<std::size_t> hits(n * m);
    std::vector<double> radius(n * m);
    std::vector<std::vector<ReturnEvent>> returns(n);
    const Walker walker(coeff, domain, spec, options.dt);

    auto run = [&](std::size_t p) {
        Philox4x32 rng(options.seed, p);
        std::normal_distribution<double> normal;
        PathStats stats;
        stats.max_radius = x0.norm();
        stats.returns = &returns[p];
        stats.max_returns = options.max_recorded_returns;
        Point x = x0;
        long done = 0;
        for (std::size_t k = 0; k < m; ++k) {
            for (; done < steps[k]; ++done) walker.step(x, rng, normal, stats);
            positions[k * n + p] = x;
            hits[k * n + p] = stats.hits;
            radius[k * n + p] = stats.max_radius;
        }
    };
    for_each_index(options.exec, n, run);

    std::vector<ParticleEnsemble> out(m);
    for (std::size_t k = 0; k < m; ++k) {
        ParticleEnsemble& e = out[k];
        e.time = times[k];
        e.seed = options.seed;
        e.positions.assign(positions.begin() + static_cast<std::ptrdiff_t>(k * n),
                           positions.begin() + static_cast<std::ptrdiff_t>((k + 1) * n));
        for (std::size_t p = 0; p < n; ++p) {
            e.boundary_hits += hits[k * n + p];
            e.max_radius = std::max(e.max_radius, radius[k * n + p]);
        }
    }
    if (m > 0) {
        for (const auto& r : returns) {
            for (const auto& ev : r) {
                if (out.back().returns.size() >= options.max_recorded_returns) break;
                out.back().returns.push_back(ev);
            }
        }
    }
    return out;
}

ParticleEnsemble simulate_paths(const CoefficientField& coeff, const DomainSpec& domain,
                                const BoundaryMeasureSpec& spec, const Point& x0, double t,
                                const PathOptions& options) {
    return simulate_snapshots(coeff, domain, spec, x0, {t}, options).front();
}

Estimate estimate_expectation(const ParticleEnsemble& ens, const std::function<double(const Point&)>& f) {
    const std::size_t n = ens.positions.size();
    if (n < 2) throw std::invalid_argument("at least two particles are needed");
    double sum = 0.0;
    for (const Point& x : ens.positions) sum += f(x);
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (const Point& x : ens.positions) {
        const double d = f(x) - mean;
        ss += d * d;
    }
    const double var = ss / static_cast<double>(n - 1);
    return {mean, std::sqrt(var / static_cast<double>(n))};
}

OccupationResult estimate_invariant(const CoefficientField& coeff, const DomainSpec& domain,
                                    const BoundaryMeasureSpec& spec, std::shared_ptr<const Grid> grid,
                                    const Point& x0, const OccupationOptions& options) {
    check_start(domain, x0, options.dt);
    if (options.segments < 1) throw std::invalid_argument("at least one segment is needed");
    if (options.block == 0) throw std::invalid_argument("block size must be positive");
    const long burn = steps_of(options.burn_in, options.dt);
    const long every = steps_of(options.sample_every, options.dt);
    const long total = steps_of(options.horizon, options.dt);
    if (every <= 0 || total <= 0 || total % every != 0)
        throw std::invalid_argument("horizon must be a positive multiple of the sampling interval");
    const long samples_per_particle = total / every;
    const int segs = options.segments;
    const double window = grid->window_radius();
    const auto size = static_cast<Eigen::Index>(grid->size());
    const std::size_t n = options.particles;
    const std::size_t blocks = (n + options.block - 1) / options.block;

    struct BlockTally {
        Vector mass;
        std::vector<double> in_window;
        std::vector<double> max_radius;
        std::size_t escapes = 0;
        std::size_t hits = 0;
        double radius = 0.0;
    };
    std::vector<BlockTally> tallies(blocks);
    const Walker walker(coeff, domain, spec, options.dt);

    auto run_block = [&](std::size_t b) {
        BlockTally& tally = tallies[b];
        tally.mass = Vector::Zero(size);
        tally.in_window.assign(static_cast<std::size_t>(segs), 0.0);
        tally.max_radius.assign(static_cast<std::size_t>(segs), 0.0);
        const std::size_t lo = b * options.block;
        const std::size_t hi = std::min(n, lo + options.block);
        for (std::size_t p = lo; p < hi; ++p) {
            Philox4x32 rng(options.seed, p);
            std::normal_distribution<double> normal;
            PathStats stats;
            stats.max_radius = x0.norm();
            Point x = x0;
            for (long k = 0; k < burn; ++k) walker.step(x, rng, normal, stats);
            for (long s = 0; s < samples_per_particle; ++s) {
                for (long k = 0; k < every; ++k) walker.step(x, rng, normal, stats);
                const auto seg = static_cast<std::size_t>(s * segs / samples_per_particle);
                if (x.norm() <= window + 1e-9 * grid->spacing()) tally.in_window[seg] += 1.0;
                const auto placed = transfer_point(*grid, x);
                if (placed.empty()) ++tally.escapes;
                for (const auto& [node, w] : placed) tally.mass[static_cast<Eigen::Index>(node)] += w;
                const bool segment_end = s + 1 == samples_per_particle ||
                                         (s + 1) * segs / samples_per_particle != static_cast<long>(seg);
                if (segment_end) tally.max_radius[seg] += stats.max_radius;
            }
            tally.hits += stats.hits;
            tally.radius = std::max(tally.radius, stats.max_radius);
        }
    };
    for_each_index(options.exec, blocks, run_block);

    OccupationResult res;
    res.samples = n * static_cast<std::size_t>(samples_per_particle);
    Vector mass = Vector::Zero(size);
    std::vector<double> in_window(static_cast<std::size_t>(segs), 0.0);
    std::vector<double> max_radius(static_cast<std::size_t>(segs), 0.0);
    for (const BlockTally& t : tallies) {
        mass += t.mass;
        for (int k = 0; k < segs; ++k) {
            in_window[static_cast<std::size_t>(k)] += t.in_window[static_cast<std::size_t>(k)];
            max_radius[static_cast<std::size_t>(k)] += t.max_radius[static_cast<std::size_t>(k)];
        }
        res.escapes += t.escapes;
        res.boundary_hits += t.hits;
        res.max_radius = std::max(res.max_radius, t.radius);
    }
    res.histogram = {grid, mass / static_cast<double>(res.samples)};
    for (int k = 0; k < segs; ++k) {
        const long first = (k * samples_per_particle + segs - 1) / segs;
        const long last = ((k + 1) * samples_per_particle + segs - 1) / segs;
        const double count = static_cast<double>(n) * static_cast<double>(last - first);
        res.segment_window_fraction.push_back(count > 0 ? in_window[static_cast<std::size_t>(k)] / count : 0.0);
        res.segment_mean_max_radius.push_back(max_radius[static_cast<std::size_t>(k)] / static_cast<double>(n));
    }
    return res;
}

namespace {

std::vector<double> equal_probability_edges(const BoundaryMeasureSpec& spec, const Point& z, double r_lo, int bins) {
    std::vector<double> edges{r_lo};
    for (int k = 1; k < bins; ++k) {
        const double target = static_cast<double>(k) / bins;
        double lo = edges.back();
        double hi = std::max(2.0 * lo, lo + 1.0);
        while (spec.mass_between(z, r_lo, hi) < target) hi *= 2.0;
        for (int it = 0; it < 200 && hi - lo > 1e-14 * hi; ++it) {
            const double mid = 0.5 * (lo + hi);
            (spec.mass_between(z, r_lo, mid) < target ? lo : hi) = mid;
        }
        edges.push_back(hi);
    }
    edges.push_back(std::numeric_limits<double>::infinity());
    return edges;
}

}  // namespace

ChiSquareReport return_distribution_test(const BoundaryMeasureSpec& spec, const std::vector<ReturnEvent>& events,
                                         int bins, double level) {
    ChiSquareReport rep;
    rep.samples = events.size();
    if (events.empty()) {
        rep.message = "no return events";
        return rep;
    }
    std::vector<double> observed, expected;
    if (spec.is_atomic()) {
        const std::size_t k = spec.atoms_at(events.front().z).size();
        observed.assign(k, 0.0);
        expected.assign(k, 0.0);
        for (const ReturnEvent& e : events) {
            const auto atoms = spec.atoms_at(e.z);
            if (atoms.size() != k) throw std::invalid_argument("atom count varies with z");
            std::size_t hit = k;
            for (std::size_t j = 0; j < k; ++j) {
                expected[j] += atoms[j].second;
                if ((atoms[j].first - e.y).norm() <= 1e-9 * std::max(1.0, e.y.norm())) hit = j;
            }
            if (hit == k) {
                rep.message = "post-jump position does not match any atom";
                return rep;
            }
            observed[hit] += 1.0;
        }
    } else {
        double r_lo = std::numeric_limits<double>::infinity();
        if (const auto* s = std::get_if<ShellDensity>(&spec.kind())) r_lo = s->r_inner;
        if (const auto* p = std::get_if<PowerTailDensity>(&spec.kind())) r_lo = p->r_inner;
        const auto edges = equal_probability_edges(spec, events.front().z, r_lo, bins);
        observed.assign(static_cast<std::size_t>(bins), 0.0);
        expected.assign(static_cast<std::size_t>(bins), 0.0);
        for (const ReturnEvent& e : events) {
            const double r = e.y.norm();
            const auto it = std::upper_bound(edges.begin(), edges.end(), r);
            const auto j = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(it - edges.begin() - 1, 0, bins - 1));
            observed[j] += 1.0;
            for (int b = 0; b < bins; ++b)
                expected[static_cast<std::size_t>(b)] += spec.mass_between(e.z, edges[static_cast<std::size_t>(b)],
                                                                          edges[static_cast<std::size_t>(b) + 1]);
        }
    }
    for (std::size_t j = 0; j < observed.size(); ++j) {
        if (expected[j] > 0.0) {
            const double diff = observed[j] - expected[j];
            rep.statistic += diff * diff / expected[j];
        } else if (observed[j] > 0.0) {
            rep.message = "samples fell where mu(z) has no mass";
            return rep;
        }
    }
    rep.dof = static_cast<int>(observed.size()) - 1;
    if (rep.dof <= 0) {
        rep.pass = true;
        return rep;
    }
    rep.critical = boost::math::quantile(boost::math::chi_squared(rep.dof), level);
    rep.pass = rep.statistic <= rep.critical;
    return rep;
}

}  // namespace feller
