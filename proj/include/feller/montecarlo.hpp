#pragma once

#include "feller/common.hpp"
#include "feller/geometry.hpp"
#include "feller/invariant.hpp"
#include "feller/measure.hpp"
#include "feller/operator.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

namespace feller {

/// Philox4x32-10 counter-based generator. Each (key, stream) pair is an
/// independent sequence, so particle p can draw from stream p regardless of
/// which thread runs it.
class Philox4x32 {
public:
    using result_type = std::uint32_t;
    using Block = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    Philox4x32(std::uint64_t key, std::uint64_t stream);

    static Block encrypt(Block counter, Key key);

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
    result_type operator()();
    /// 53-bit uniform on [0, 1).
    double uniform();

private:
    Key key_;
    Block counter_;
    Block buffer_{};
    int used_ = 4;
};

struct ReturnEvent {
    Point z;  ///< exit point on the boundary
    Point y;  ///< position after the jump
};

struct PathOptions {
    double dt = 1e-3;
    std::size_t particles = 1000;
    std::uint64_t seed = 1;
    Exec exec = Exec::parallel;
    std::size_t max_recorded_returns = 0;
};

struct ParticleEnsemble {
    double time = 0.0;
    std::vector<Point> positions;
    std::uint64_t seed = 0;
    std::size_t boundary_hits = 0;  ///< up to `time`, summed over particles
    double max_radius = 0.0;        ///< up to `time`
    std::vector<ReturnEvent> returns;  ///< only on the last snapshot
};

/// Euler-Maruyama with instantaneous return, started at x0. Returns one
/// ensemble per requested time (each an integer multiple of dt).
std::vector<ParticleEnsemble> simulate_snapshots(const CoefficientField& coeff, const DomainSpec& domain,
                                                 const BoundaryMeasureSpec& spec, const Point& x0,
                                                 const std::vector<double>& times, const PathOptions& options);

ParticleEnsemble simulate_paths(const CoefficientField& coeff, const DomainSpec& domain,
                                const BoundaryMeasureSpec& spec, const Point& x0, double t,
                                const PathOptions& options);

struct Estimate {
    double mean = 0.0;
    double standard_error = 0.0;
};

Estimate estimate_expectation(const ParticleEnsemble& ens, const std::function<double(const Point&)>& f);

struct OccupationOptions {
    double burn_in = 10.0;
    double horizon = 100.0;  ///< averaging length after the burn-in
    double dt = 1e-3;
    double sample_every = 0.01;
    std::size_t particles = 1000;
    std::uint64_t seed = 1;
    Exec exec = Exec::parallel;
    int segments = 4;
    std::size_t block = 64;  ///< particles per accumulation block
};

struct OccupationResult {
    MeasureVector histogram;  ///< occupation fractions deposited on the grid
    std::vector<double> segment_window_fraction;
    std::vector<double> segment_mean_max_radius;  ///< mean over particles of the radius reached so far
    std::size_t samples = 0;
    std::size_t escapes = 0;  ///< samples that fell beyond the grid
    std::size_t boundary_hits = 0;
    double max_radius = 0.0;
};

/// Time-averaged occupation after a burn-in, deposited with multilinear
/// weights. Particle blocks are reduced in a fixed order so serial and
/// parallel runs agree bitwise.
OccupationResult estimate_invariant(const CoefficientField& coeff, const DomainSpec& domain,
                                    const BoundaryMeasureSpec& spec, std::shared_ptr<const Grid> grid,
                                    const Point& x0, const OccupationOptions& options);

struct ChiSquareReport {
    double statistic = 0.0;
    int dof = 0;
    double critical = 0.0;
    bool pass = false;
    std::size_t samples = 0;
    std::string message;
};

/// Compares post-jump positions with mu(z): atom categories for atomic
/// measures, equal-probability radial bins for densities.
ChiSquareReport return_distribution_test(const BoundaryMeasureSpec& spec, const std::vector<ReturnEvent>& events,
                                         int bins = 10, double level = 0.99);

}  // namespace feller
