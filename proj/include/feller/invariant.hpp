#pragma once

#include "feller/common.hpp"
#include "feller/resolvent.hpp"
#include "feller/semigroup.hpp"

#include <functional>
#include <iosfwd>
#include <memory>
#include <vector>

namespace feller {

/// Nonnegative node masses on a grid.
struct MeasureVector {
    std::shared_ptr<const Grid> grid;
    Vector mass;

    static MeasureVector dirac(std::shared_ptr<const Grid> grid, std::size_t node);

    double total() const { return mass.sum(); }
    double window_mass() const;
    MeasureVector normalized() const;
    /// Integral of node values f against the masses.
    double integrate(const Vector& f) const { return mass.dot(f); }
};

/// Half the l1 distance between node masses. Throws std::invalid_argument
/// when the grids differ.
double tv_distance(const MeasureVector& a, const MeasureVector& b);

struct AbelStep {
    double lambda = 0.0;
    MeasureVector nu;
    double window_mass = 0.0;
    double tv_to_previous = -1.0;  ///< negative for the first entry
};

struct AbelResult {
    std::vector<AbelStep> steps;
    bool converged = false;
    std::size_t limit_index = 0;  ///< first step whose TV to the previous one is below tol

    const MeasureVector& limit() const { return steps[limit_index].nu; }
};

/// 1, 1/2, ..., 2^-count.
std::vector<double> halving_sequence(int count);

/// nu_lambda = lambda D L(lambda)^{-T} e_{x0} for each lambda (computed
/// concurrently under Exec::parallel), with the TV between successive
/// entries and the window mass.
AbelResult abel_invariant(const DiscreteOperator& op, std::size_t x0_node, const std::vector<double>& lambdas,
                          double tol = 1e-3, Exec exec = Exec::parallel);

struct FixedPoint {
    Vector vector;          ///< normalized to unit l1 norm
    double eigenvalue = 0.0;  ///< l1 norm of apply(vector)
    int iterations = 0;
    bool converged = false;
};

/// Power iteration for the dominant nonnegative eigenvector of a positive map.
FixedPoint power_fixed_point(const std::function<Vector(const Vector&)>& apply, const Vector& init,
                             double tol = 1e-13, int max_iter = 100000);

struct StationaryResult {
    MeasureVector nu;
    double eigenvalue = 0.0;
    int iterations = 0;
    bool converged = false;
    bool has_stationary = false;  ///< eigenvalue >= 1 - eig_tol
};

/// Dominant eigenvector of lambda R(lambda)' (the adjoint resolvent step).
StationaryResult stationary_solve(const DiscreteOperator& op, double lambda = 1.0, double eig_tol = 1e-6,
                                  double tol = 1e-13, int max_iter = 100000);

struct ConvergenceRow {
    double t = 0.0;
    double tv = 0.0;
    std::vector<double> sup_error;  ///< per dictionary entry, window sup of |T(t) f - <f, nu*>|
};

/// Evolves nu0 under the adjoint step and the dictionary under the forward
/// step, reporting distances at each time in `times` (multiples of tau).
std::vector<ConvergenceRow> convergence_study(const SemigroupEvolver& ev, const MeasureVector& nu0,
                                              const MeasureVector& nu_star, const std::vector<double>& times,
                                              const std::vector<Vector>& dictionary = {});

/// CSV: node,x[,y],mass
void write_measure_csv(std::ostream& os, const MeasureVector& nu);

}  // namespace feller
