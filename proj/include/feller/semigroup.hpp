#pragma once

#include "feller/common.hpp"
#include "feller/resolvent.hpp"

#include <vector>

namespace feller {

/// Implicit Euler stepping u_{k+1} = (I - tau A_h)^{-1} u_k on a fixed
/// truncation. The factorization is built once and shared read-only.
class SemigroupEvolver {
public:
    SemigroupEvolver(DiscreteOperator op, double tau);

    const DiscreteOperator& op() const noexcept { return op_; }
    const Grid& grid() const noexcept { return *op_.grid; }
    double tau() const noexcept { return tau_; }

    /// t / tau as an integer; throws std::invalid_argument otherwise.
    long steps_for(double t) const;

    /// One step with positivity and contraction asserted.
    Vector step(const Vector& f) const;
    /// Adjoint of one step acting on node masses.
    Vector adjoint_step(const Vector& nu) const;

    Vector evolve(const Vector& f, double t) const;
    /// Iterates 0, tau, ..., t and returns every state (size t/tau + 1).
    std::vector<Vector> trajectory(const Vector& f, double t) const;
    /// Independent evolutions, run concurrently under Exec::parallel.
    std::vector<Vector> evolve_batch(const std::vector<Vector>& fs, double t, Exec exec = Exec::parallel) const;

    /// Image of the indicator of `node` under the adjoint step.
    Vector kernel_row(std::size_t node) const;

private:
    DiscreteOperator op_;
    double tau_;
    Resolvent step_;
};

/// ||1 - T(t) 1|| over the window nodes.
double markov_defect(const SemigroupEvolver& ev, double t);

/// ||T(t+s) f - T(t) T(s) f||_inf
double chapman_kolmogorov_residual(const SemigroupEvolver& ev, const Vector& f, double t, double s);

struct GeneratorConsistency {
    double residual = 0.0;  ///< window sup of trapezoid integral of T(s) A_h f minus (T(t) f - f)
    double constant = 0.0;  ///< residual / (tau + h)
};

GeneratorConsistency generator_consistency(const SemigroupEvolver& ev, const Vector& f, double t);

/// Window sup of sum_{k>=1} tau e^{-lambda k tau} T(k tau) f - R(lambda) f.
double laplace_consistency(const SemigroupEvolver& ev, double lambda, const Vector& f);

struct StrongFellerReport {
    std::vector<double> spacings;
    std::vector<double> moduli;  ///< max |u(x) - u(x')| / h over adjacent window nodes
    bool stabilizes = false;     ///< last refinement ratio below 1.5
};

/// Evolves the indicator of the box [lo, hi] on grids h, h/2, ... and
/// reports the discrete Lipschitz modulus at time t.
StrongFellerReport strong_feller_diagnostic(const Problem& problem, int n, double tau, const Point& lo,
                                            const Point& hi, double t, int levels = 3);

/// Largest discrete Lipschitz quotient between lattice-adjacent interior
/// window nodes.
double lipschitz_modulus(const Grid& grid, const Vector& u);

}  // namespace feller
