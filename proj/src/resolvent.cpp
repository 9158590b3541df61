#include "feller/resolvent.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace feller {

GridFunction GridFunction::zeros(std::shared_ptr<const Grid> grid) {
    const auto n = static_cast<Eigen::Index>(grid->size());
    return {std::move(grid), Vector::Zero(n)};
}

GridFunction GridFunction::constant(std::shared_ptr<const Grid> grid, double c) {
    const auto n = static_cast<Eigen::Index>(grid->size());
    return {std::move(grid), Vector::Constant(n, c)};
}

GridFunction GridFunction::sample(std::shared_ptr<const Grid> grid,
                                  const std::function<double(const Point&)>& f) {
    GridFunction g = zeros(grid);
    for (std::size_t i = 0; i < grid->size(); ++i) g.values[static_cast<Eigen::Index>(i)] = f(grid->node(i));
    return g;
}

Vector DiscreteOperator::apply_generator(const Vector& u) const {
    Vector out = rows * u;
    for (std::size_t i = 0; i < interior.size(); ++i)
        if (!interior[i]) out[static_cast<Eigen::Index>(i)] = 0.0;
    return out;
}

Vector DiscreteOperator::apply_shifted(double lambda, const Vector& u) const {
    Vector out = rows * u;
    for (std::size_t i = 0; i < interior.size(); ++i) {
        const auto k = static_cast<Eigen::Index>(i);
        if (interior[i]) out[k] = lambda * u[k] - out[k];
    }
    return out;
}

SparseColMatrix DiscreteOperator::system_matrix(double lambda) const {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(rows.nonZeros()) + interior.size());
    for (Eigen::Index r = 0; r < rows.outerSize(); ++r) {
        const bool in = interior[static_cast<std::size_t>(r)];
        for (SparseRowMatrix::InnerIterator it(rows, r); it; ++it)
            trip.emplace_back(r, it.col(), in ? -it.value() : it.value());
        if (in) trip.emplace_back(r, r, lambda);
    }
    SparseColMatrix m(rows.rows(), rows.cols());
    m.setFromTriplets(trip.begin(), trip.end());
    m.makeCompressed();
    return m;
}

Vector DiscreteOperator::interior_part(const Vector& f) const {
    Vector out = f;
    for (std::size_t i = 0; i < interior.size(); ++i)
        if (!interior[i]) out[static_cast<Eigen::Index>(i)] = 0.0;
    return out;
}

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;

void interior_row(const Grid& grid, const CoefficientField& coeff, std::size_t i, Triplets& out) {
    const Point& x = grid.node(i);
    const Matrix2 a = coeff.diffusion(x);
    const Point b = coeff.drift(x);
    const int d = grid.dimension();
    if (!a.allFinite() || !b.allFinite())
        throw std::invalid_argument("non-finite coefficient at node " + std::to_string(i));
    const auto row = static_cast<int>(i);
    const Stencil& arms = grid.arms(i);
    double diag = 0.0;
    for (int k = 0; k < d; ++k) {
        const Arm& m = arms[2 * k];
        const Arm& p = arms[2 * k + 1];
        const double c = 2.0 * a(k, k) / (m.length + p.length);
        double wp = c / p.length;
        double wm = c / m.length;
        if (b[k] > 0.0) wp += b[k] / p.length;
        else if (b[k] < 0.0) wm -= b[k] / m.length;
        out.emplace_back(row, static_cast<int>(p.node), wp);
        out.emplace_back(row, static_cast<int>(m.node), wm);
        diag -= wp + wm;
    }
    if (d == 2 && a(0, 1) != 0.0) {
        const double h = grid.spacing();
        for (const Arm& arm : arms)
            if (std::abs(arm.length - h) > 1e-12 * h)
                throw std::logic_error("mixed derivative needs a full stencil at node " + std::to_string(i));
        const long li = std::lround(x[0] / h);
        const long lj = std::lround(x[1] / h);
        const double c = 2.0 * a(0, 1) / (4.0 * h * h);
        const int signs[4][3] = {{1, 1, 1}, {-1, -1, 1}, {1, -1, -1}, {-1, 1, -1}};
        for (const auto& s : signs) {
            const auto q = grid.lattice_node(li + s[0], lj + s[1]);
            if (!q) throw std::logic_error("mixed-derivative stencil leaves the node set at " + std::to_string(i));
            out.emplace_back(row, static_cast<int>(*q), s[2] * c);
        }
    }
    out.emplace_back(row, row, diag);
}

}  // namespace

DiscreteOperator assemble(std::shared_ptr<const Grid> grid, const CoefficientField& coeff,
                          const TruncatedMeasure& measure, Exec exec) {
    if (measure.grid.get() != grid.get() && measure.grid->size() != grid->size())
        throw std::invalid_argument("truncated measure was built on a different grid");
    const std::size_t n = grid->size();
    std::vector<Triplets> per_row(n);
    std::vector<const WeightRow*> boundary_row(n, nullptr);
    for (std::size_t k = 0; k < measure.boundary_nodes.size(); ++k)
        boundary_row[measure.boundary_nodes[k]] = &measure.rows[k];

    auto build = [&](std::size_t i) {
        Triplets& t = per_row[i];
        const auto row = static_cast<int>(i);
        switch (grid->kind(i)) {
            case NodeKind::interior:
                interior_row(*grid, coeff, i, t);
                break;
            case NodeKind::physical_boundary:
                t.emplace_back(row, row, 1.0);
                if (boundary_row[i])
                    for (const auto& [node, w] : boundary_row[i]->entries)
                        t.emplace_back(row, static_cast<int>(node), -w);
                break;
            case NodeKind::artificial_boundary:
                t.emplace_back(row, row, 1.0);
                break;
        }
    };

    for_each_index(exec, n, build);

    Triplets all;
    std::size_t total = 0;
    for (const auto& t : per_row) total += t.size();
    all.reserve(total);
    for (const auto& t : per_row) all.insert(all.end(), t.begin(), t.end());

    DiscreteOperator op;
    op.grid = grid;
    op.rows.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    op.rows.setFromTriplets(all.begin(), all.end());
    op.rows.makeCompressed();
    op.interior.resize(n);
    for (std::size_t i = 0; i < n; ++i) op.interior[i] = grid->kind(i) == NodeKind::interior ? 1 : 0;
    return op;
}

bool has_m_matrix_pattern(const DiscreteOperator& op, double tol) {
    for (Eigen::Index r = 0; r < op.rows.outerSize(); ++r) {
        const bool in = op.interior[static_cast<std::size_t>(r)];
        double off_sum = 0.0;
        double diag = 0.0;
        for (SparseRowMatrix::InnerIterator it(op.rows, r); it; ++it) {
            if (it.col() == r) {
                diag = it.value();
                continue;
            }
            if (in && it.value() < -tol) return false;
            if (!in && it.value() > tol) return false;
            off_sum += it.value();
        }
        if (in && diag > tol) return false;
        if (!in) {
            if (std::abs(diag - 1.0) > tol) return false;
            if (-off_sum > 1.0 + 1e-12) return false;
        }
    }
    return true;
}

Resolvent::Resolvent(const DiscreteOperator& op, double lambda)
    : lambda_(lambda), size_(op.size()), interior_(op.interior), matrix_(op.system_matrix(lambda)),
      lu_(std::make_shared<LU>()) {
    if (!(lambda > 0.0) || !std::isfinite(lambda))
        throw std::invalid_argument("lambda must be positive");
    lu_->analyzePattern(matrix_);
    lu_->factorize(matrix_);
    if (lu_->info() != Eigen::Success)
        throw NumericalError("factorization of lambda - A_h failed: " + lu_->lastErrorMessage());
}

Vector Resolvent::solve_raw(const Vector& rhs) const {
    Vector x = lu_->solve(rhs);
    x += lu_->solve(Vector(rhs - matrix_ * x));
    if (!x.allFinite()) throw NumericalError("resolvent solve produced non-finite values");
    return x;
}

Vector Resolvent::apply(const Vector& f) const {
    Vector rhs = f;
    for (std::size_t i = 0; i < interior_.size(); ++i)
        if (!interior_[i]) rhs[static_cast<Eigen::Index>(i)] = 0.0;
    return solve_raw(rhs);
}

Vector Resolvent::apply_adjoint(const Vector& nu) const {
    Vector y = lu_->transpose().solve(nu);
    if (!y.allFinite()) throw NumericalError("adjoint resolvent solve produced non-finite values");
    for (std::size_t i = 0; i < interior_.size(); ++i)
        if (!interior_[i]) y[static_cast<Eigen::Index>(i)] = 0.0;
    return y;
}

double Resolvent::condition_estimate() const {
    const auto n = static_cast<Eigen::Index>(size_);
    double norm_a = 0.0;
    for (Eigen::Index c = 0; c < matrix_.outerSize(); ++c) {
        double s = 0.0;
        for (SparseColMatrix::InnerIterator it(matrix_, c); it; ++it) s += std::abs(it.value());
        norm_a = std::max(norm_a, s);
    }
    Vector x = Vector::Constant(n, 1.0 / static_cast<double>(n));
    double est = 0.0;
    for (int iter = 0; iter < 5; ++iter) {
        const Vector y = lu_->solve(x);
        est = y.lpNorm<1>();
        const Vector xi = y.unaryExpr([](double v) { return v >= 0.0 ? 1.0 : -1.0; });
        const Vector z = lu_->transpose().solve(xi);
        Eigen::Index j = 0;
        const double zmax = z.cwiseAbs().maxCoeff(&j);
        if (zmax <= z.dot(x)) break;
        x.setZero();
        x[j] = 1.0;
    }
    return norm_a * est;
}

void check_resolvent_contract(double lambda, const Vector& f_interior, const Vector& u, double tol) {
    const double fnorm = f_interior.size() ? f_interior.cwiseAbs().maxCoeff() : 0.0;
    const double unorm = u.size() ? u.cwiseAbs().maxCoeff() : 0.0;
    if (lambda * unorm > fnorm * (1.0 + tol) + std::numeric_limits<double>::min())
        throw NumericalError("resolvent contraction violated: ||lambda u|| = " + std::to_string(lambda * unorm) +
                             " > ||f|| = " + std::to_string(fnorm));
    if (f_interior.size() && f_interior.minCoeff() >= 0.0 && u.minCoeff() < -tol * fnorm / lambda)
        throw NumericalError("resolvent positivity violated: min u = " + std::to_string(u.minCoeff()));
}

GridFunction solve_resolvent(const DiscreteOperator& op, double lambda, const GridFunction& f) {
    if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
    if (static_cast<std::size_t>(f.values.size()) != op.size())
        throw std::invalid_argument("right-hand side does not match the operator size");
    const Resolvent r(op, lambda);
    const Vector fin = op.interior_part(f.values);
    Vector u = r.apply(fin);
    check_resolvent_contract(lambda, fin, u);
    return {op.grid, std::move(u)};
}

Truncation build_truncation(const Problem& problem, int n, std::optional<double> window_radius, Exec exec) {
    problem.measure.validate(problem.domain);
    auto grid = std::make_shared<const Grid>(build_exhaustion(problem.domain, n, problem.h, window_radius));
    const EllipticityReport ell = check_ellipticity(problem.coefficients, *grid);
    if (!ell.pass) throw std::invalid_argument("ellipticity check failed: " + ell.message);
    TruncatedMeasure tm = truncate_measure(problem.measure, grid, exec);
    DiscreteOperator op = assemble(grid, problem.coefficients, tm, exec);
    return {grid, std::move(tm), std::move(op)};
}

int default_initial_truncation(const Problem& problem) {
    double reach = problem.measure.support_radius(problem.domain);
    if (const auto* p = std::get_if<PowerTailDensity>(&problem.measure.kind())) reach = p->r_inner + 1.0;
    int n0 = std::max(1, static_cast<int>(std::ceil(reach - 1e-12)));
    while (n0 + 1.0 <= problem.domain.radius + problem.h) ++n0;
    return n0;
}

ExhaustResult exhaust_resolvent(const Problem& problem, double lambda,
                                const std::function<double(const Point&)>& f, const ExhaustOptions& options) {
    if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
    const int n0 = options.n0.value_or(default_initial_truncation(problem));
    const double window = options.window_radius.value_or(n0 + 1.0);
    auto f_plus = [&](const Point& x) { return std::max(f(x), 0.0); };
    auto f_minus = [&](const Point& x) { return std::max(-f(x), 0.0); };

    ExhaustResult res;
    std::vector<double> prev_plus, prev_minus;
    const int last = options.max_steps >= 0 ? std::min(options.max_n, n0 + options.max_steps) : options.max_n;
    for (int n = n0; n <= last; ++n) {
        Truncation t = build_truncation(problem, n, window);
        if (n == n0) {
            for (std::size_t i : t.grid->window_nodes()) res.window_points.push_back(t.grid->node(i));
        }
        std::vector<std::size_t> idx;
        idx.reserve(res.window_points.size());
        for (const Point& p : res.window_points) {
            auto k = t.grid->find(p);
            if (!k) throw std::logic_error("window node missing from a larger truncation");
            idx.push_back(*k);
        }
        const Vector fp = t.op.interior_part(GridFunction::sample(t.grid, f_plus).values);
        const Vector fm = t.op.interior_part(GridFunction::sample(t.grid, f_minus).values);
        const auto size = static_cast<Eigen::Index>(t.grid->size());
        if (n == n0 && fp.isZero(0.0) && fm.isZero(0.0)) {
            res.solution = GridFunction::zeros(t.grid);
            res.window_values.assign(res.window_points.size(), 0.0);
            res.converged = true;
            res.final_n = n;
            return res;
        }
        const Resolvent r(t.op, lambda);
        Vector up = Vector::Zero(size);
        Vector um = Vector::Zero(size);
        if (!fp.isZero(0.0)) {
            up = r.apply(fp);
            check_resolvent_contract(lambda, fp, up);
        }
        if (!fm.isZero(0.0)) {
            um = r.apply(fm);
            check_resolvent_contract(lambda, fm, um);
        }
        std::vector<double> wp(idx.size()), wm(idx.size());
        for (std::size_t k = 0; k < idx.size(); ++k) {
            wp[k] = up[static_cast<Eigen::Index>(idx[k])];
            wm[k] = um[static_cast<Eigen::Index>(idx[k])];
        }
        res.solution = {t.grid, up - um};
        res.final_n = n;
        res.window_values.resize(idx.size());
        for (std::size_t k = 0; k < idx.size(); ++k) res.window_values[k] = wp[k] - wm[k];

        if (!prev_plus.empty()) {
            IncrementRecord rec{n, std::numeric_limits<double>::infinity(), 0.0};
            for (std::size_t k = 0; k < idx.size(); ++k) {
                const double ip = wp[k] - prev_plus[k];
                const double im = wm[k] - prev_minus[k];
                rec.min_increment = std::min({rec.min_increment, ip, im});
                rec.sup_increment = std::max(rec.sup_increment, std::abs(ip - im));
            }
            res.history.push_back(rec);
            if (rec.min_increment < -options.monotone_tol)
                throw NumericalError("exhaustion is not monotone at n = " + std::to_string(n) +
                                     " (increment " + std::to_string(rec.min_increment) + ")");
            if (rec.sup_increment < options.tol) {
                res.converged = true;
                res.condition_estimate = r.condition_estimate();
                return res;
            }
        }
        prev_plus = std::move(wp);
        prev_minus = std::move(wm);
        if (n == last) res.condition_estimate = r.condition_estimate();
    }
    return res;
}

double resolvent_identity_residual(const DiscreteOperator& op, double lambda1, double lambda2, const Vector& f) {
    if (!(lambda1 > 0.0) || !(lambda2 > 0.0)) throw std::invalid_argument("lambda must be positive");
    const Resolvent r1(op, lambda1);
    const Resolvent r2(op, lambda2);
    const Vector u1 = r1.apply(f);
    const Vector u2 = r2.apply(f);
    const Vector u12 = r1.apply(u2);
    const Vector res = u1 - u2 - (lambda2 - lambda1) * u12;
    return res.size() ? res.cwiseAbs().maxCoeff() : 0.0;
}

PrincipleOutcome maximum_principle_check(const DiscreteOperator& op, double lambda, const Vector& u, double tol) {
    const Vector r = op.apply_shifted(lambda, u);
    const double unorm = std::max(1.0, u.size() ? u.cwiseAbs().maxCoeff() : 0.0);
    double diag_max = 0.0;
    for (Eigen::Index k = 0; k < op.rows.outerSize(); ++k)
        diag_max = std::max(diag_max, std::abs(op.rows.coeff(k, k)));
    const double residual_tol = tol * unorm * (1.0 + lambda + diag_max);
    for (std::size_t i = 0; i < op.size(); ++i) {
        const auto k = static_cast<Eigen::Index>(i);
        const double limit = op.interior[i] ? residual_tol : tol * unorm;
        if (r[k] > limit) return PrincipleOutcome::skipped;
    }
    return u.maxCoeff() <= tol * unorm ? PrincipleOutcome::pass : PrincipleOutcome::fail;
}

GridFunction harmonic_bump(const DiscreteOperator& op, double lambda) {
    const Resolvent r(op, lambda);
    Vector rhs = Vector::Zero(static_cast<Eigen::Index>(op.size()));
    for (std::size_t i = 0; i < op.size(); ++i)
        if (op.grid->kind(i) == NodeKind::artificial_boundary) rhs[static_cast<Eigen::Index>(i)] = 1.0;
    return {op.grid, r.solve_raw(rhs)};
}

MinimalityReport minimality_probe(const ExhaustResult& limit, const DiscreteOperator& op, double lambda,
                                  const Vector& f, const Vector& candidate, double tol) {
    const Vector r = op.apply_shifted(lambda, candidate);
    const double scale = std::max({1.0, candidate.cwiseAbs().maxCoeff(), f.cwiseAbs().maxCoeff()});
    for (std::size_t i = 0; i < op.size(); ++i) {
        const auto k = static_cast<Eigen::Index>(i);
        switch (op.grid->kind(i)) {
            case NodeKind::interior:
                if (std::abs(r[k] - f[k]) > 1e-8 * scale)
                    throw std::invalid_argument("candidate does not solve the interior equation");
                break;
            case NodeKind::physical_boundary:
                if (std::abs(r[k]) > 1e-8 * scale)
                    throw std::invalid_argument("candidate violates a boundary row");
                break;
            case NodeKind::artificial_boundary:
                break;
        }
    }
    MinimalityReport rep;
    rep.min_gap = std::numeric_limits<double>::infinity();
    double limit_norm = 1.0;
    for (double v : limit.window_values) limit_norm = std::max(limit_norm, std::abs(v));
    for (std::size_t k = 0; k < limit.window_points.size(); ++k) {
        const auto i = op.grid->find(limit.window_points[k]);
        if (!i) throw std::invalid_argument("candidate grid does not contain the window");
        rep.min_gap = std::min(rep.min_gap, candidate[static_cast<Eigen::Index>(*i)] - limit.window_values[k]);
    }
    rep.pass = rep.min_gap >= -tol * limit_norm;
    return rep;
}

}  // namespace feller
