#include "feller/montecarlo.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <memory>

using namespace feller;
using Catch::Approx;

namespace {

const DomainSpec kLine = DomainSpec::half_line(1.0);

CoefficientField deterministic_decay() { return custom_operator(1, {"0", "", "", "-x", "", "1"}); }

}  // namespace

TEST_CASE("Philox4x32-10 known answers") {
    using B = Philox4x32::Block;
    CHECK(Philox4x32::encrypt(B{0, 0, 0, 0}, {0, 0}) == B{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
    CHECK(Philox4x32::encrypt(B{0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu}) ==
          B{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
    CHECK(Philox4x32::encrypt(B{0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u}) ==
          B{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});

    Philox4x32 g(0, 0);
    CHECK(g() == 0x6627e8d5u);
    CHECK(g() == 0xe169c58du);
}

TEST_CASE("streams are reproducible and distinct") {
    Philox4x32 a(42, 7), b(42, 7), c(42, 8), d(43, 7);
    int same_c = 0, same_d = 0;
    for (int k = 0; k < 100; ++k) {
        const auto va = a();
        CHECK(va == b());
        same_c += va == c();
        same_d += va == d();
    }
    CHECK(same_c < 3);
    CHECK(same_d < 3);

    Philox4x32 u(1, 0);
    double s = 0.0;
    for (int k = 0; k < 100000; ++k) {
        const double v = u.uniform();
        REQUIRE(v >= 0.0);
        REQUIRE(v < 1.0);
        s += v;
    }
    CHECK(s / 100000 == Approx(0.5).margin(0.005));
}

TEST_CASE("frozen dynamics stay at the start") {
    const auto coeff = custom_operator(1, {"0", "", "", "0", "", "1"});
    PathOptions opt;
    opt.particles = 8;
    const auto ens = simulate_paths(coeff, kLine, BoundaryMeasureSpec::dirac(Point(2.0, 0.0), 1), Point(3.0, 0.0),
                                    0.5, opt);
    for (const Point& x : ens.positions) CHECK(x == Point(3.0, 0.0));
    CHECK(ens.boundary_hits == 0);
    CHECK(ens.max_radius == 3.0);
}

TEST_CASE("deterministic decay reaches the boundary at ln 2") {
    PathOptions opt;
    opt.particles = 16;
    opt.dt = 1e-3;
    opt.max_recorded_returns = 4;
    const auto snaps = simulate_snapshots(deterministic_decay(), kLine, BoundaryMeasureSpec::dirac(Point(2.0, 0.0), 1),
                                          Point(2.0, 0.0), {0.69, 0.70}, opt);
    REQUIRE(snaps.size() == 2);
    CHECK(snaps[0].boundary_hits == 0);
    for (const Point& x : snaps[0].positions) CHECK(x[0] == Approx(2.0 * std::pow(0.999, 690)));
    CHECK(snaps[1].boundary_hits == 16);
    REQUIRE(snaps[1].returns.size() == 4);
    for (const auto& ev : snaps[1].returns) {
        CHECK(ev.z == Point(1.0, 0.0));
        CHECK(ev.y == Point(2.0, 0.0));
    }
    CHECK(std::log(2.0) > 0.69);
    CHECK(std::log(2.0) < 0.70);
}

TEST_CASE("serial and parallel paths agree and the seed matters") {
    const auto ou = builtin_operator(BuiltinOperator::ou, 2);
    const DomainSpec disc = DomainSpec::ball_exterior(2, 1.0);
    const auto spec = BoundaryMeasureSpec::radial_dirac(2.0, 2);
    PathOptions opt;
    opt.particles = 300;
    opt.dt = 1e-2;
    opt.seed = 99;
    opt.exec = Exec::serial;
    const auto s = simulate_paths(ou, disc, spec, Point(2.0, 0.0), 1.0, opt);
    opt.exec = Exec::parallel;
    const auto p = simulate_paths(ou, disc, spec, Point(2.0, 0.0), 1.0, opt);
    CHECK(s.positions == p.positions);
    CHECK(s.boundary_hits == p.boundary_hits);
    CHECK(s.boundary_hits > 0);
    opt.seed = 100;
    const auto q = simulate_paths(ou, disc, spec, Point(2.0, 0.0), 1.0, opt);
    CHECK(q.positions != p.positions);
}

TEST_CASE("Euler-Maruyama mean and standard error far from the boundary") {
    PathOptions opt;
    opt.particles = 20000;
    opt.dt = 1e-3;
    const auto ens = simulate_paths(builtin_operator(BuiltinOperator::ou, 1), kLine,
                                    BoundaryMeasureSpec::dirac(Point(2.0, 0.0), 1), Point(20.0, 0.0), 0.5, opt);
    CHECK(ens.boundary_hits == 0);
    const Estimate e = estimate_expectation(ens, [](const Point& x) { return x[0]; });
    const double mean = 20.0 * std::pow(0.999, 500);
    double var = 0.0;
    for (int j = 0; j < 500; ++j) var += 2e-3 * std::pow(0.999, 2 * j);
    CHECK(std::abs(e.mean - mean) < 4.0 * e.standard_error);
    CHECK(e.standard_error == Approx(std::sqrt(var / 20000.0)).epsilon(0.05));

    ParticleEnsemble one;
    one.positions = {Point(2.0, 0.0)};
    CHECK_THROWS_AS(estimate_expectation(one, [](const Point& x) { return x[0]; }), std::invalid_argument);
}

TEST_CASE("invalid simulation requests") {
    const auto ou = builtin_operator(BuiltinOperator::ou, 1);
    const auto spec = BoundaryMeasureSpec::dirac(Point(2.0, 0.0), 1);
    PathOptions opt;
    CHECK_THROWS_AS(simulate_paths(ou, kLine, spec, Point(0.5, 0.0), 1.0, opt), std::invalid_argument);
    CHECK_THROWS_AS(simulate_paths(ou, kLine, spec, Point(2.0, 0.0), 1.0005, opt), std::invalid_argument);
    CHECK_THROWS_AS(simulate_snapshots(ou, kLine, spec, Point(2.0, 0.0), {1.0, 0.5}, opt), std::invalid_argument);
    opt.dt = 0.0;
    CHECK_THROWS_AS(simulate_paths(ou, kLine, spec, Point(2.0, 0.0), 1.0, opt), std::invalid_argument);
    opt.dt = 1e-3;
    opt.particles = 2;
    CHECK_THROWS_AS(simulate_paths(custom_operator(1, {"-1", "", "", "", "", "1"}), kLine, spec, Point(2.0, 0.0), 0.01, opt),
                    NumericalError);
}

TEST_CASE("returned positions follow the boundary measure") {
    const auto ou = builtin_operator(BuiltinOperator::ou, 1);
    const BoundaryMeasureSpec shell(ShellDensity{1.5, 2.5}, 1);
    PathOptions opt;
    opt.particles = 2000;
    opt.dt = 1e-3;
    opt.max_recorded_returns = 1000000;
    const auto ens = simulate_paths(ou, kLine, shell, Point(2.0, 0.0), 2.0, opt);
    REQUIRE(ens.returns.size() == ens.boundary_hits);
    REQUIRE(ens.returns.size() > 500);
    const auto good = return_distribution_test(shell, ens.returns, 10, 0.99);
    CHECK(good.pass);
    CHECK(good.dof == 9);
    CHECK(good.critical == Approx(21.666).epsilon(1e-4));
    const auto bad = return_distribution_test(BoundaryMeasureSpec(ShellDensity{1.5, 3.0}, 1), ens.returns, 10, 0.99);
    CHECK_FALSE(bad.pass);

    const BoundaryMeasureSpec atoms(AtomicMeasure{{Atom{AtomPlacement::fixed, Point(2.0, 0.0), 1.0, 0.3},
                                                   Atom{AtomPlacement::fixed, Point(3.0, 0.0), 1.0, 0.7}}},
                                    1);
    const auto e2 = simulate_paths(ou, kLine, atoms, Point(2.0, 0.0), 2.0, opt);
    const auto r2 = return_distribution_test(atoms, e2.returns);
    CHECK(r2.pass);
    CHECK(r2.dof == 1);
    const auto single = return_distribution_test(BoundaryMeasureSpec::dirac(Point(2.0, 0.0), 1),
                                                 {{Point(1.0, 0.0), Point(2.0, 0.0)}});
    CHECK(single.pass);
    CHECK(single.dof == 0);
    CHECK_FALSE(return_distribution_test(atoms, {}).pass);
}

TEST_CASE("occupation of a deterministic cycle") {
    auto grid = std::make_shared<const Grid>(build_exhaustion(kLine, 2, 0.05));
    OccupationOptions opt;
    opt.particles = 4;
    opt.burn_in = 1.0;
    opt.horizon = 20.0;
    opt.dt = 1e-3;
    opt.sample_every = 0.01;
    const auto occ = estimate_invariant(deterministic_decay(), kLine, BoundaryMeasureSpec::dirac(Point(2.0, 0.0), 1),
                                        grid, Point(2.0, 0.0), opt);
    CHECK(occ.samples == 4 * 2000);
    CHECK(occ.escapes == 0);
    CHECK(occ.histogram.total() == Approx(1.0));
    double below = 0.0;
    for (std::size_t i = 0; i < grid->size(); ++i) {
        const double x = grid->node(i)[0];
        const double m = occ.histogram.mass[static_cast<Eigen::Index>(i)];
        if (x < 1.5 - 1e-9) below += m;
        else if (std::abs(x - 1.5) < 1e-9) below += 0.5 * m;
    }
    CHECK(below == Approx(std::log(1.5) / std::log(2.0)).margin(0.01));
    REQUIRE(occ.segment_window_fraction.size() == 4);
    for (double f : occ.segment_window_fraction) CHECK(f == 1.0);
    for (double r : occ.segment_mean_max_radius) CHECK(r == 2.0);
    CHECK(occ.boundary_hits == 4 * 30);

    opt.sample_every = 0.0105;
    CHECK_THROWS_AS(estimate_invariant(deterministic_decay(), kLine, BoundaryMeasureSpec::dirac(Point(2.0, 0.0), 1),
                                       grid, Point(2.0, 0.0), opt),
                    std::invalid_argument);
}
