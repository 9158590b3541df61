#include "feller/invariant.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

namespace feller {

MeasureVector MeasureVector::dirac(std::shared_ptr<const Grid> grid, std::size_t node) {
    MeasureVector m{std::move(grid), Vector()};
    m.mass = Vector::Zero(static_cast<Eigen::Index>(m.grid->size()));
    m.mass[static_cast<Eigen::Index>(node)] = 1.0;
    return m;
}

double MeasureVector::window_mass() const {
    double s = 0.0;
    for (std::size_t i : grid->window_nodes()) s += mass[static_cast<Eigen::Index>(i)];
    return s;
}

MeasureVector MeasureVector::normalized() const {
    const double t = total();
    if (!(t > 0.0)) throw std::invalid_argument("cannot normalize a zero measure");
    return {grid, mass / t};
}

double tv_distance(const MeasureVector& a, const MeasureVector& b) {
    if (a.grid != b.grid) {
        if (!a.grid || !b.grid || a.grid->size() != b.grid->size() || a.grid->nodes() != b.grid->nodes())
            throw std::invalid_argument("measures live on different grids");
    }
    return 0.5 * (a.mass - b.mass).lpNorm<1>();
}

std::vector<double> halving_sequence(int count) {
    std::vector<double> out;
    for (int k = 0; k <= count; ++k) out.push_back(std::ldexp(1.0, -k));
    return out;
}

AbelResult abel_invariant(const DiscreteOperator& op, std::size_t x0_node, const std::vector<double>& lambdas,
                          double tol, Exec exec) {
    if (lambdas.empty()) throw std::invalid_argument("empty lambda sequence");
    for (std::size_t k = 0; k < lambdas.size(); ++k) {
        if (!(lambdas[k] > 0.0)) throw std::invalid_argument("lambda must be positive");
        if (k > 0 && !(lambdas[k] < lambdas[k - 1])) throw std::invalid_argument("lambda sequence must decrease");
    }
    if (op.grid->kind(x0_node) != NodeKind::interior) throw std::invalid_argument("x0 must be an interior node");
    AbelResult res;
    res.steps.resize(lambdas.size());
    const Vector delta = MeasureVector::dirac(op.grid, x0_node).mass;
    auto solve = [&](std::size_t k) {
        const Resolvent r(op, lambdas[k]);
        AbelStep& s = res.steps[k];
        s.lambda = lambdas[k];
        s.nu = {op.grid, (lambdas[k] * r.apply_adjoint(delta)).cwiseMax(0.0)};
        s.window_mass = s.nu.window_mass();
    };
    for_each_index(exec, lambdas.size(), solve);
    res.limit_index = lambdas.size() - 1;
    for (std::size_t k = 1; k < res.steps.size(); ++k) {
        res.steps[k].tv_to_previous = tv_distance(res.steps[k].nu, res.steps[k - 1].nu);
        if (!res.converged && res.steps[k].tv_to_previous < tol) {
            res.converged = true;
            res.limit_index = k;
        }
    }
    return res;
}

FixedPoint power_fixed_point(const std::function<Vector(const Vector&)>& apply, const Vector& init, double tol,
                             int max_iter) {
    FixedPoint fp;
    const double n0 = init.lpNorm<1>();
    if (!(n0 > 0.0)) throw std::invalid_argument("initial vector must be nonzero");
    Vector v = init / n0;
    for (int it = 1; it <= max_iter; ++it) {
        Vector w = apply(v);
        const double norm = w.lpNorm<1>();
        if (!(norm > 0.0)) throw NumericalError("power iteration collapsed to zero");
        w /= norm;
        const double change = (w - v).lpNorm<1>();
        v = std::move(w);
        fp.eigenvalue = norm;
        fp.iterations = it;
        if (change < tol) {
            fp.converged = true;
            break;
        }
    }
    fp.vector = v;
    return fp;
}

StationaryResult stationary_solve(const DiscreteOperator& op, double lambda, double eig_tol, double tol,
                                  int max_iter) {
    const Resolvent r(op, lambda);
    Vector init = Vector::Zero(static_cast<Eigen::Index>(op.size()));
    for (std::size_t i = 0; i < op.size(); ++i)
        if (op.interior[i]) init[static_cast<Eigen::Index>(i)] = 1.0;
    const FixedPoint fp = power_fixed_point(
        [&](const Vector& v) { return Vector((lambda * r.apply_adjoint(v)).cwiseMax(0.0)); }, init, tol, max_iter);
    StationaryResult res;
    res.nu = {op.grid, fp.vector};
    res.eigenvalue = fp.eigenvalue;
    res.iterations = fp.iterations;
    res.converged = fp.converged;
    res.has_stationary = fp.eigenvalue >= 1.0 - eig_tol;
    return res;
}

std::vector<ConvergenceRow> convergence_study(const SemigroupEvolver& ev, const MeasureVector& nu0,
                                              const MeasureVector& nu_star, const std::vector<double>& times,
                                              const std::vector<Vector>& dictionary) {
    std::vector<ConvergenceRow> rows;
    MeasureVector nu = nu0;
    std::vector<Vector> fs = dictionary;
    std::vector<double> targets;
    for (const Vector& f : dictionary) targets.push_back(nu_star.integrate(f));
    const auto window = ev.grid().window_nodes();
    long done = 0;
    for (double t : times) {
        const long k = ev.steps_for(t);
        if (k < done) throw std::invalid_argument("times must be nondecreasing");
        for (; done < k; ++done) {
            nu.mass = ev.adjoint_step(nu.mass).cwiseMax(0.0);
            for (Vector& f : fs) f = ev.step(f);
        }
        ConvergenceRow row;
        row.t = t;
        row.tv = tv_distance(nu, nu_star);
        for (std::size_t j = 0; j < fs.size(); ++j) {
            double e = 0.0;
            for (std::size_t i : window)
                if (ev.grid().kind(i) == NodeKind::interior)
                    e = std::max(e, std::abs(fs[j][static_cast<Eigen::Index>(i)] - targets[j]));
            row.sup_error.push_back(e);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_measure_csv(std::ostream& os, const MeasureVector& nu) {
    const Grid& g = *nu.grid;
    os << (g.dimension() == 1 ? "node,x,mass\n" : "node,x,y,mass\n");
    char buf[128];
    for (std::size_t i = 0; i < g.size(); ++i) {
        const Point& p = g.node(i);
        const double m = nu.mass[static_cast<Eigen::Index>(i)];
        if (g.dimension() == 1)
            std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", i, p[0], m);
        else
            std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g\n", i, p[0], p[1], m);
        os << buf;
    }
}

}  // namespace feller
