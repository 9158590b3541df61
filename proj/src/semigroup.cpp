#include "feller/semigroup.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace feller {

SemigroupEvolver::SemigroupEvolver(DiscreteOperator op, double tau)
    : op_(std::move(op)), tau_(tau), step_(op_, 1.0 / tau) {
    if (!(tau > 0.0) || !std::isfinite(tau)) throw std::invalid_argument("tau must be positive");
}

long SemigroupEvolver::steps_for(double t) const {
    if (!(t >= 0.0) || !std::isfinite(t)) throw std::invalid_argument("time must be nonnegative");
    const double k = t / tau_;
    const long steps = std::lround(k);
    if (std::abs(k - static_cast<double>(steps)) > 1e-9 * std::max(1.0, k))
        throw std::invalid_argument("time must be an integer multiple of tau");
    return steps;
}

Vector SemigroupEvolver::step(const Vector& f) const {
    const double lambda = 1.0 / tau_;
    const Vector rhs = op_.interior_part(f) * lambda;
    Vector u = step_.apply(rhs);
    check_resolvent_contract(lambda, rhs, u);
    return u;
}

Vector SemigroupEvolver::adjoint_step(const Vector& nu) const {
    return step_.apply_adjoint(nu) / tau_;
}

Vector SemigroupEvolver::evolve(const Vector& f, double t) const {
    const long k = steps_for(t);
    Vector u = f;
    for (long i = 0; i < k; ++i) u = step(u);
    return u;
}

std::vector<Vector> SemigroupEvolver::trajectory(const Vector& f, double t) const {
    const long k = steps_for(t);
    std::vector<Vector> out;
    out.reserve(static_cast<std::size_t>(k + 1));
    out.push_back(f);
    for (long i = 0; i < k; ++i) out.push_back(step(out.back()));
    return out;
}

std::vector<Vector> SemigroupEvolver::evolve_batch(const std::vector<Vector>& fs, double t, Exec exec) const {
    steps_for(t);
    std::vector<Vector> out(fs.size());
    for_each_index(exec, fs.size(), [&](std::size_t i) { out[i] = evolve(fs[i], t); });
    return out;
}

Vector SemigroupEvolver::kernel_row(std::size_t node) const {
    Vector e = Vector::Zero(static_cast<Eigen::Index>(op_.size()));
    e[static_cast<Eigen::Index>(node)] = 1.0;
    return adjoint_step(e);
}

namespace {

double window_sup(const Grid& grid, const Vector& v) {
    double m = 0.0;
    for (std::size_t i : grid.window_nodes())
        if (grid.kind(i) != NodeKind::artificial_boundary) m = std::max(m, std::abs(v[static_cast<Eigen::Index>(i)]));
    return m;
}

}  // namespace

double markov_defect(const SemigroupEvolver& ev, double t) {
    const Vector one = Vector::Ones(static_cast<Eigen::Index>(ev.op().size()));
    return window_sup(ev.grid(), one - ev.evolve(one, t));
}

double chapman_kolmogorov_residual(const SemigroupEvolver& ev, const Vector& f, double t, double s) {
    const Vector a = ev.evolve(f, t + s);
    const Vector b = ev.evolve(ev.evolve(f, s), t);
    return (a - b).cwiseAbs().maxCoeff();
}

GeneratorConsistency generator_consistency(const SemigroupEvolver& ev, const Vector& f, double t) {
    const std::vector<Vector> g = ev.trajectory(ev.op().apply_generator(f), t);
    Vector integral = Vector::Zero(f.size());
    for (std::size_t k = 0; k < g.size(); ++k) {
        const double w = (k == 0 || k + 1 == g.size()) ? 0.5 : 1.0;
        integral += w * ev.tau() * g[k];
    }
    if (g.size() == 1) integral.setZero();
    const Vector diff = ev.op().interior_part(integral - (ev.evolve(f, t) - f));
    const double r = window_sup(ev.grid(), diff);
    return {r, r / (ev.tau() + ev.grid().spacing())};
}

double laplace_consistency(const SemigroupEvolver& ev, double lambda, const Vector& f) {
    if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
    const Resolvent r(ev.op(), lambda);
    const Vector exact = r.apply(ev.op().interior_part(f));
    Vector sum = Vector::Zero(f.size());
    Vector u = f;
    for (long k = 1;; ++k) {
        u = ev.step(u);
        const double w = ev.tau() * std::exp(-lambda * static_cast<double>(k) * ev.tau());
        sum += w * u;
        if (w / (lambda * ev.tau()) < 1e-13) break;
    }
    return window_sup(ev.grid(), sum - exact);
}

double lipschitz_modulus(const Grid& grid, const Vector& u) {
    const double h = grid.spacing();
    double m = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (grid.kind(i) != NodeKind::interior || !grid.in_window(i)) continue;
        for (int s = 1; s < 2 * grid.dimension(); s += 2) {
            const Arm& a = grid.arms(i)[s];
            if (std::abs(a.length - h) > 1e-9 * h) continue;
            if (grid.kind(a.node) != NodeKind::interior || !grid.in_window(a.node)) continue;
            m = std::max(m, std::abs(u[static_cast<Eigen::Index>(i)] - u[static_cast<Eigen::Index>(a.node)]) / h);
        }
    }
    return m;
}

StrongFellerReport strong_feller_diagnostic(const Problem& problem, int n, double tau, const Point& lo,
                                            const Point& hi, double t, int levels) {
    StrongFellerReport rep;
    const int d = problem.domain.dimension;
    auto indicator = [&](const Point& x) {
        for (int k = 0; k < d; ++k)
            if (x[k] < lo[k] || x[k] > hi[k]) return 0.0;
        return 1.0;
    };
    Problem p = problem;
    for (int level = 0; level < levels; ++level) {
        const Truncation tr = build_truncation(p, n, problem.domain.radius + 0.5 * (n + 1.0 - problem.domain.radius));
        const SemigroupEvolver ev(tr.op, tau);
        const Vector u = ev.evolve(GridFunction::sample(tr.grid, indicator).values, t);
        rep.spacings.push_back(p.h);
        rep.moduli.push_back(lipschitz_modulus(*tr.grid, u));
        p.h *= 0.5;
    }
    const std::size_t k = rep.moduli.size();
    rep.stabilizes = k >= 2 && rep.moduli[k - 1] < 1.5 * rep.moduli[k - 2];
    return rep;
}

}  // namespace feller
