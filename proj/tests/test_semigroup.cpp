#include "feller/semigroup.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>

using namespace feller;
using Catch::Approx;

namespace {

Problem ou_line(double h) {
    return {DomainSpec::half_line(1.0), builtin_operator(BuiltinOperator::ou, 1),
            BoundaryMeasureSpec::dirac(Point(2.0, 0.0), 1), h};
}

double bump(const Point& x) { return std::exp(-4.0 * (x[0] - 2.5) * (x[0] - 2.5)); }

SemigroupEvolver evolver(const Problem& p, int n, double tau, std::optional<double> window = std::nullopt) {
    return SemigroupEvolver(build_truncation(p, n, window).op, tau);
}

}  // namespace

TEST_CASE("trivial evolutions") {
    const SemigroupEvolver ev = evolver(ou_line(0.1), 3, 0.01);
    const Vector zero = Vector::Zero(static_cast<Eigen::Index>(ev.op().size()));
    CHECK(ev.evolve(zero, 0.5).isZero(0.0));
    const Vector f = GridFunction::sample(ev.op().grid, bump).values;
    CHECK(ev.evolve(f, 0.0) == f);
    CHECK(ev.trajectory(f, 0.05).size() == 6);
    CHECK(ev.steps_for(0.3) == 30);
    CHECK_THROWS_AS(ev.steps_for(0.015), std::invalid_argument);
    CHECK_THROWS_AS(ev.evolve(f, -0.01), std::invalid_argument);
    CHECK_THROWS_AS(SemigroupEvolver(ev.op(), 0.0), std::invalid_argument);

    const Vector one = Vector::Ones(static_cast<Eigen::Index>(ev.op().size()));
    const Vector t1 = ev.evolve(one, 1.0);
    CHECK(t1.minCoeff() >= -1e-12);
    CHECK(t1.maxCoeff() <= 1.0 + 1e-12);
}

TEST_CASE("Chapman-Kolmogorov and batch evolution") {
    const SemigroupEvolver ev = evolver(ou_line(0.1), 3, 0.02);
    const Vector f = GridFunction::sample(ev.op().grid, bump).values;
    CHECK(chapman_kolmogorov_residual(ev, f, 0.3, 0.2) < 1e-12);
    const Vector g = GridFunction::sample(ev.op().grid, [](const Point& x) { return std::cos(x[0]); }).values;
    const auto batch = ev.evolve_batch({f, g}, 0.4);
    REQUIRE(batch.size() == 2);
    CHECK(batch[0] == ev.evolve(f, 0.4));
    CHECK(batch[1] == ev.evolve(g, 0.4));
}

TEST_CASE("kernel rows are sub-probability vectors matching the forward step") {
    const SemigroupEvolver ev = evolver(
        {DomainSpec::ball_exterior(2, 1.0), builtin_operator(BuiltinOperator::ou, 2),
         BoundaryMeasureSpec::radial_dirac(2.0, 2), 0.25},
        2, 0.05);
    const Grid& g = ev.grid();
    const auto n = static_cast<Eigen::Index>(g.size());
    for (std::size_t i : g.nodes_of(NodeKind::interior)) {
        const Vector row = ev.kernel_row(i);
        CHECK(row.minCoeff() >= -1e-14);
        CHECK(row.sum() <= 1.0 + 1e-12);
    }
    const std::size_t i = g.nodes_of(NodeKind::interior)[g.nodes_of(NodeKind::interior).size() / 2];
    const Vector row = ev.kernel_row(i);
    for (Eigen::Index j = 0; j < n; j += 7) {
        Vector e = Vector::Zero(n);
        e[j] = 1.0;
        CHECK(ev.step(e)[static_cast<Eigen::Index>(i)] == Approx(row[j]).margin(1e-13));
    }
}

TEST_CASE("Markov defect shrinks as the truncation grows") {
    const double w = 2.5;
    const double d2 = markov_defect(evolver(ou_line(0.05), 2, 0.01, w), 1.0);
    const double d3 = markov_defect(evolver(ou_line(0.05), 3, 0.01, w), 1.0);
    const double d5 = markov_defect(evolver(ou_line(0.05), 5, 0.01, w), 1.0);
    CHECK(d2 > d3);
    CHECK(d3 > d5);
    CHECK(d5 < 1e-5);
}

TEST_CASE("Laplace transform of the evolution approaches the resolvent at first order") {
    const Problem p = ou_line(0.1);
    const Truncation t = build_truncation(p, 3);
    const Vector f = GridFunction::sample(t.grid, bump).values;
    const double e1 = laplace_consistency(SemigroupEvolver(t.op, 0.02), 1.0, f);
    const double e2 = laplace_consistency(SemigroupEvolver(t.op, 0.01), 1.0, f);
    const double e3 = laplace_consistency(SemigroupEvolver(t.op, 0.005), 1.0, f);
    CHECK(e2 < e1);
    CHECK(e3 < e2);
    CHECK(e1 / e2 == Approx(2.0).margin(0.3));
    CHECK(e2 / e3 == Approx(2.0).margin(0.3));
}

TEST_CASE("evolution integrates the generator") {
    const Problem p = ou_line(0.05);
    const Truncation t = build_truncation(p, 3, 3.0);
    const Vector f = Resolvent(t.op, 1.0).apply(GridFunction::sample(t.grid, bump).values);
    const auto c1 = generator_consistency(SemigroupEvolver(t.op, 0.02), f, 0.5);
    const auto c2 = generator_consistency(SemigroupEvolver(t.op, 0.005), f, 0.5);
    CHECK(c2.residual < c1.residual);
    CHECK(c2.residual < 0.05);
    CHECK(std::isfinite(c2.constant));
}

TEST_CASE("discrete Lipschitz modulus stabilizes under refinement") {
    const auto rep = strong_feller_diagnostic(ou_line(0.1), 3, 0.01, Point(2.0, 0.0), Point(2.5, 0.0), 0.5, 3);
    REQUIRE(rep.moduli.size() == 3);
    CHECK(rep.spacings[2] == Approx(0.025));
    CHECK(rep.stabilizes);
    for (double m : rep.moduli) CHECK(m > 0.0);

    const Grid g = build_exhaustion(DomainSpec::half_line(1.0), 2, 0.1);
    const Vector lin = GridFunction::sample(std::make_shared<const Grid>(g), [](const Point& x) { return 3.0 * x[0]; }).values;
    CHECK(lipschitz_modulus(g, lin) == Approx(3.0));
}
