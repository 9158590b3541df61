#include "feller/measure.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <memory>
#include <numbers>
#include <random>
#include <sstream>

using namespace feller;
using Catch::Approx;

namespace {

std::shared_ptr<const Grid> grid_ptr(const DomainSpec& dom, int n, double h) {
    return std::make_shared<const Grid>(build_exhaustion(dom, n, h));
}

Point centroid(const Grid& g, const WeightRow& row) {
    Point c = Point::Zero();
    for (const auto& [node, w] : row.entries) c += w * g.node(node);
    return c / row.mass();
}

double square(const Point& x) { return x.squaredNorm(); }

}  // namespace

TEST_CASE("multilinear transfer in one dimension") {
    const Grid g = build_exhaustion(DomainSpec::half_line(1.0), 2, 0.1);
    auto w = transfer_point(g, Point(2.03, 0.0));
    REQUIRE(w.size() == 2);
    CHECK(g.node(w[0].first)[0] == Approx(2.0));
    CHECK(w[0].second == Approx(0.7));
    CHECK(g.node(w[1].first)[0] == Approx(2.1));
    CHECK(w[1].second == Approx(0.3));

    w = transfer_point(g, Point(1.05, 0.0));
    REQUIRE(w.size() == 1);
    CHECK(g.node(w[0].first)[0] == Approx(1.1));
    CHECK(w[0].second == Approx(1.0));

    w = transfer_point(g, Point(2.5, 0.0));
    REQUIRE(w.size() == 1);
    CHECK(w[0].second == 1.0);

    CHECK(transfer_point(g, Point(3.55, 0.0)).empty());
}

TEST_CASE("bilinear transfer preserves mass and centroid away from the boundary") {
    const Grid g = build_exhaustion(DomainSpec::ball_exterior(2, 1.0), 3, 0.2);
    const Point x(1.93, -0.71);
    const auto w = transfer_point(g, x);
    CHECK(w.size() == 4);
    double m = 0.0;
    Point c = Point::Zero();
    for (const auto& [node, v] : w) {
        CHECK(v > 0.0);
        m += v;
        c += v * g.node(node);
    }
    CHECK(m == Approx(1.0));
    CHECK((c - x).norm() < 1e-12);
}

TEST_CASE("closed-form integrals against the boundary measure") {
    const BoundaryMeasureSpec shell1(ShellDensity{1.5, 2.5}, 1);
    const BoundaryMeasureSpec shell2(ShellDensity{1.5, 2.5}, 2);
    const BoundaryMeasureSpec tail1(PowerTailDensity{2.0, 5.0}, 1);
    const BoundaryMeasureSpec tail2(PowerTailDensity{2.0, 5.0}, 2);
    const BoundaryMeasureSpec heavy(PowerTailDensity{2.0, 3.0}, 1);
    const Point z1(1.0, 0.0);
    const Point z2(0.6, 0.8);

    CHECK(shell1.integrate(z1, square) == Approx((2.5 * 2.5 * 2.5 - 1.5 * 1.5 * 1.5) / 3.0).epsilon(1e-10));
    CHECK(shell2.integrate(z2, square) == Approx(4.25).epsilon(1e-10));
    CHECK(shell2.integrate(z2, [](const Point&) { return 1.0; }) == Approx(1.0).epsilon(1e-10));
    CHECK(tail1.integrate(z1, square) == Approx(8.0).epsilon(1e-8));
    CHECK(tail2.integrate(z2, square) == Approx(12.0).epsilon(1e-8));
    CHECK(tail1.integrate(z1, [](const Point&) { return 1.0; }) == Approx(1.0).epsilon(1e-10));
    CHECK_THROWS_AS(heavy.integrate(z1, square), DivergentIntegral);

    CHECK(shell1.mass_between(z1, 2.0, 2.5) == Approx(0.5));
    CHECK(shell2.mass_between(z2, 0.0, 2.0) == Approx((4.0 - 2.25) / (6.25 - 2.25)));
    CHECK(tail1.mass_between(z1, 2.0, 4.0) == Approx(1.0 - std::pow(2.0, -4.0)));
    CHECK(tail2.mass_between(z2, 4.0, 1e300) == Approx(0.125));

    const auto radial = BoundaryMeasureSpec::radial_dirac(2.0, 2);
    CHECK(radial.integrate(z2, [](const Point& x) { return x[1]; }) == Approx(1.6));
}

TEST_CASE("samples follow the boundary measure") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto uniform = [&] { return u(rng); };
    const BoundaryMeasureSpec shell2(ShellDensity{1.5, 2.5}, 2);
    const BoundaryMeasureSpec tail1(PowerTailDensity{2.0, 5.0}, 1);
    const int n = 200000;
    double s = 0.0, below = 0.0;
    for (int k = 0; k < n; ++k) {
        s += shell2.sample(Point(1.0, 0.0), uniform).squaredNorm();
        if (tail1.sample(Point(1.0, 0.0), uniform)[0] < 3.0) below += 1.0;
    }
    CHECK(s / n == Approx(4.25).epsilon(0.01));
    CHECK(below / n == Approx(1.0 - std::pow(1.5, -4.0)).margin(0.005));

    const BoundaryMeasureSpec two_atoms(AtomicMeasure{{Atom{AtomPlacement::fixed, Point(2.0, 0.0), 1.0, 0.25},
                                                       Atom{AtomPlacement::fixed, Point(3.0, 0.0), 1.0, 0.75}}},
                                        1);
    double at_three = 0.0;
    for (int k = 0; k < n; ++k)
        if (two_atoms.sample(Point(1.0, 0.0), uniform)[0] == 3.0) at_three += 1.0;
    CHECK(at_three / n == Approx(0.75).margin(0.005));
}

TEST_CASE("validation rejects measures that are not probability laws on the domain") {
    const DomainSpec line = DomainSpec::half_line(1.0);
    CHECK_THROWS_AS(BoundaryMeasureSpec::dirac(Point(0.5, 0.0), 1).validate(line), std::invalid_argument);
    CHECK_THROWS_AS(BoundaryMeasureSpec::dirac(Point(1.0, 0.0), 1).validate(line), std::invalid_argument);
    CHECK_THROWS_AS(BoundaryMeasureSpec(PowerTailDensity{2.0, 1.0}, 1).validate(line), std::invalid_argument);
    CHECK_THROWS_AS(BoundaryMeasureSpec(ShellDensity{0.5, 2.0}, 1).validate(line), std::invalid_argument);
    CHECK_THROWS_AS(BoundaryMeasureSpec::radial_dirac(0.9, 2).validate(DomainSpec::ball_exterior(2, 1.0)),
                    std::invalid_argument);
    const BoundaryMeasureSpec short_weight(AtomicMeasure{{Atom{AtomPlacement::fixed, Point(2.0, 0.0), 1.0, 0.5}}}, 1);
    CHECK_THROWS_AS(short_weight.validate(line), std::invalid_argument);
    CHECK_NOTHROW(BoundaryMeasureSpec::radial_dirac(2.0, 2).validate(DomainSpec::ball_exterior(2, 1.0)));
}

TEST_CASE("discretized radial atoms keep their centroid") {
    auto g = grid_ptr(DomainSpec::ball_exterior(2, 1.0), 3, 0.2);
    const auto spec = BoundaryMeasureSpec::radial_dirac(2.0, 2);
    for (std::size_t z : g->nodes_of(NodeKind::physical_boundary)) {
        const WeightRow row = discretize_measure(spec, z, *g);
        CHECK(row.mass() == Approx(1.0));
        CHECK(std::abs(row.deficit) < 1e-12);
        CHECK((centroid(*g, row) - 2.0 * g->node(z)).norm() < 1e-12);
        for (const auto& [node, w] : row.entries) CHECK(g->kind(node) == NodeKind::interior);
    }
    CHECK_THROWS_AS(discretize_measure(spec, g->nodes_of(NodeKind::interior).front(), *g), std::invalid_argument);
}

TEST_CASE("discretized densities approximate mass and first moment") {
    auto g = grid_ptr(DomainSpec::half_line(1.0), 3, 0.1);
    const std::size_t z = g->nodes_of(NodeKind::physical_boundary).front();
    const WeightRow row = discretize_measure(BoundaryMeasureSpec(ShellDensity{1.5, 2.5}, 1), z, *g);
    CHECK(row.mass() == Approx(1.0).epsilon(1e-12));
    CHECK(centroid(*g, row)[0] == Approx(2.0).epsilon(1e-9));

    auto g2 = grid_ptr(DomainSpec::ball_exterior(2, 1.0), 3, 0.1);
    const std::size_t z2 = g2->nodes_of(NodeKind::physical_boundary).front();
    const WeightRow row2 = discretize_measure(BoundaryMeasureSpec(ShellDensity{1.5, 2.5}, 2), z2, *g2);
    CHECK(row2.mass() == Approx(1.0).epsilon(1e-9));
    for (std::size_t zn : g2->nodes_of(NodeKind::physical_boundary))
        CHECK(discretize_measure(BoundaryMeasureSpec(ShellDensity{1.5, 2.5}, 2), zn, *g2).mass() <= 1.0 + 1e-12);
}

TEST_CASE("truncated measures grow with n and vanish before the support is reached") {
    const DomainSpec line = DomainSpec::half_line(1.0);
    const auto atom = BoundaryMeasureSpec::dirac(Point(2.0, 0.0), 1);
    const TruncatedMeasure t1 = truncate_measure(atom, grid_ptr(line, 1, 0.1));
    CHECK(t1.mass(0) == 0.0);
    const TruncatedMeasure t2 = truncate_measure(atom, grid_ptr(line, 2, 0.1));
    CHECK(t2.mass(0) == Approx(1.0));

    const BoundaryMeasureSpec tail(PowerTailDensity{2.0, 5.0}, 1);
    double previous = 0.0;
    std::optional<TruncatedMeasure> coarse;
    for (int n = 2; n <= 5; ++n) {
        TruncatedMeasure tm = truncate_measure(tail, grid_ptr(line, n, 0.1));
        CHECK(tm.mass(0) > previous);
        CHECK(tm.mass(0) <= 1.0 + 1e-12);
        previous = tm.mass(0);
        if (coarse) CHECK(check_monotone(*coarse, tm).pass);
        coarse = std::move(tm);
    }
    CHECK(previous > tail.mass_between(Point(1.0, 0.0), 0.0, 5.0));

    const TruncatedMeasure other = truncate_measure(tail, grid_ptr(line, 3, 0.05));
    CHECK_THROWS_AS(check_monotone(*coarse, other), std::invalid_argument);
}

TEST_CASE("truncation is monotone for radial atoms in two dimensions") {
    const DomainSpec dom = DomainSpec::ball_exterior(2, 1.0);
    const auto spec = BoundaryMeasureSpec::radial_dirac(2.5, 2);
    const TruncatedMeasure a = truncate_measure(spec, grid_ptr(dom, 2, 0.25));
    const TruncatedMeasure b = truncate_measure(spec, grid_ptr(dom, 3, 0.25));
    const auto rep = check_monotone(a, b);
    CHECK(rep.pass);
    for (std::size_t k = 0; k < b.rows.size(); ++k) CHECK(b.mass(k) == Approx(1.0));
}

TEST_CASE("concentration and continuity diagnostics") {
    const DomainSpec line = DomainSpec::half_line(1.0);
    const auto rep = concentration_check(BoundaryMeasureSpec(PowerTailDensity{2.0, 5.0}, 1), line, 3, 0.5);
    CHECK(rep.pass);
    CHECK(rep.min_mass == Approx(1.0 - std::pow(2.0, -4.0)));
    CHECK(rep.smallest_n_for_half == 2);
    CHECK_THROWS_AS(concentration_check(BoundaryMeasureSpec::dirac(Point(2.0, 0.0), 1), line, 3, 0.0),
                    std::invalid_argument);

    const DomainSpec disc = DomainSpec::ball_exterior(2, 1.0);
    const std::vector<std::function<double(const Point&)>> dict{[](const Point& x) { return x[0]; }};
    const auto jumps = boundary_continuity(BoundaryMeasureSpec::radial_dirac(2.0, 2), disc, dict, {16, 64});
    REQUIRE(jumps.size() == 2);
    CHECK(jumps[0] <= 4.0 * std::sin(std::numbers::pi / 16.0) + 1e-9);
    CHECK(jumps[0] > 3.5 * std::sin(std::numbers::pi / 16.0));
    CHECK(jumps[1] < jumps[0]);
}

TEST_CASE("sparse measure csv") {
    const TruncatedMeasure tm =
        truncate_measure(BoundaryMeasureSpec::dirac(Point(2.05, 0.0), 1), grid_ptr(DomainSpec::half_line(1.0), 2, 0.1));
    std::ostringstream os;
    write_truncated_measure_csv(os, tm);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    CHECK(line == "z_node,node,weight");
    int rows = 0;
    while (std::getline(is, line)) ++rows;
    CHECK(rows == 2);
}
