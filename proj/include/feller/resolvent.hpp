#pragma once

#include "feller/common.hpp"
#include "feller/geometry.hpp"
#include "feller/measure.hpp"
#include "feller/operator.hpp"

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include <functional>
#include <memory>
#include <optional>
#include <vector>

namespace feller {

/// Node-indexed values on a grid.
struct GridFunction {
    std::shared_ptr<const Grid> grid;
    Vector values;

    static GridFunction zeros(std::shared_ptr<const Grid> grid);
    static GridFunction constant(std::shared_ptr<const Grid> grid, double c);
    static GridFunction sample(std::shared_ptr<const Grid> grid, const std::function<double(const Point&)>& f);

    double sup_norm() const { return values.size() ? values.cwiseAbs().maxCoeff() : 0.0; }
};

using SparseRowMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using SparseColMatrix = Eigen::SparseMatrix<double>;

/// Discrete A_n with its boundary rows.
///
/// Interior rows hold the stencil of A (so (A_h u)_i = rows.row(i) * u);
/// physical-boundary rows hold e_z - w(z, .); artificial rows hold e_a. The
/// resolvent shift is applied only at solve time.
struct DiscreteOperator {
    std::shared_ptr<const Grid> grid;
    SparseRowMatrix rows;
    std::vector<std::uint8_t> interior;  ///< 1 on interior rows

    std::size_t size() const { return interior.size(); }

    /// A_h u on interior rows, 0 elsewhere.
    Vector apply_generator(const Vector& u) const;

    /// lambda u - A_h u on interior rows; the boundary-row residual
    /// u(z) - sum w u (or u(a)) elsewhere.
    Vector apply_shifted(double lambda, const Vector& u) const;

    /// L(lambda): interior rows lambda e_i - A_h, other rows unchanged.
    SparseColMatrix system_matrix(double lambda) const;

    /// Zeroes non-interior entries (the injection D of right-hand sides).
    Vector interior_part(const Vector& f) const;
};

/// Assembles A_n: central second differences with Shortley-Weller arms,
/// first-order upwind drift, and the boundary rows of `measure`.
DiscreteOperator assemble(std::shared_ptr<const Grid> grid, const CoefficientField& coeff,
                          const TruncatedMeasure& measure, Exec exec = Exec::parallel);

/// Sign-pattern check: interior off-diagonals >= 0 and diagonal <= 0;
/// boundary rows diagonal 1 with off-diagonals -w, w >= 0, sum w <= 1.
bool has_m_matrix_pattern(const DiscreteOperator& op, double tol = 1e-14);

/// Factorized R(lambda) = L(lambda)^{-1} D for one shift.
class Resolvent {
public:
    Resolvent(const DiscreteOperator& op, double lambda);

    double lambda() const noexcept { return lambda_; }
    std::size_t size() const noexcept { return size_; }

    Vector apply(const Vector& f) const;          ///< L^{-1} D f
    Vector apply_adjoint(const Vector& nu) const;  ///< D L^{-T} nu
    /// Solve with an explicit right-hand side on every row (no injection).
    Vector solve_raw(const Vector& rhs) const;

    /// Hager-Higham estimate of the 1-norm condition number of L(lambda).
    double condition_estimate() const;

private:
    using LU = Eigen::SparseLU<SparseColMatrix, Eigen::COLAMDOrdering<int>>;
    double lambda_;
    std::size_t size_;
    std::vector<std::uint8_t> interior_;
    SparseColMatrix matrix_;
    std::shared_ptr<LU> lu_;
};

/// Solves lambda u - A_h u = f with the boundary rows enforced and checks
/// contraction and positivity (tolerance 1e-9 relative) before returning.
GridFunction solve_resolvent(const DiscreteOperator& op, double lambda, const GridFunction& f);

/// Checks the resolvent contract on a computed pair (u, f).
void check_resolvent_contract(double lambda, const Vector& f_interior, const Vector& u,
                              double tol = 1e-9);

/// A problem on the unbounded domain, before truncation.
struct Problem {
    DomainSpec domain;
    CoefficientField coefficients;
    BoundaryMeasureSpec measure;
    double h = 0.1;
};

struct Truncation {
    std::shared_ptr<const Grid> grid;
    TruncatedMeasure measure;
    DiscreteOperator op;
};

Truncation build_truncation(const Problem& problem, int n, std::optional<double> window_radius = std::nullopt,
                            Exec exec = Exec::parallel);

/// Smallest n >= 1 with n + 1 above the inner radius and all atoms (or the
/// inner radius of a density's support, plus one) inside the closed ball B_n.
int default_initial_truncation(const Problem& problem);

struct ExhaustOptions {
    std::optional<int> n0;
    double tol = 1e-8;
    int max_n = 64;
    std::optional<double> window_radius;  ///< defaults to n0 + 1
    double monotone_tol = 1e-12;
    int max_steps = -1;  ///< cap on the number of truncations after n0 (-1: until max_n)
};

struct IncrementRecord {
    int n = 0;
    double min_increment = 0.0;  ///< min over the window of u_n - u_{n-1}
    double sup_increment = 0.0;  ///< max over the window of |u_n - u_{n-1}|
};

struct ExhaustResult {
    GridFunction solution;                ///< on the final truncation
    std::vector<Point> window_points;
    std::vector<double> window_values;
    std::vector<IncrementRecord> history;
    bool converged = false;
    int final_n = 0;
    double condition_estimate = 0.0;  ///< of the final system
};

/// Monotone exhaustion n0, n0+1, ... realizing R(lambda, A_mu) f on the
/// window. f is split into positive and negative parts, each of which must
/// increase with n (NumericalError otherwise). Non-convergence within the
/// budget is reported through `converged`, never truncated silently.
ExhaustResult exhaust_resolvent(const Problem& problem, double lambda,
                                const std::function<double(const Point&)>& f, const ExhaustOptions& options = {});

/// ||[R(l1) - R(l2) - (l2 - l1) R(l1) R(l2)] f||_inf
double resolvent_identity_residual(const DiscreteOperator& op, double lambda1, double lambda2, const Vector& f);

enum class PrincipleOutcome { pass, fail, skipped };

/// Discrete maximum principle: if (lambda - A_h) u <= 0 inside and
/// u(z) <= sum w u on the boundary, then u <= 0. Skipped when the
/// preconditions do not hold.
PrincipleOutcome maximum_principle_check(const DiscreteOperator& op, double lambda, const Vector& u,
                                         double tol = 1e-10);

/// w >= 0 with (lambda - A_h) w = 0 inside, boundary rows satisfied and
/// w = 1 on the artificial boundary.
GridFunction harmonic_bump(const DiscreteOperator& op, double lambda);

struct MinimalityReport {
    bool pass = false;
    double min_gap = 0.0;  ///< min over the window of candidate - exhaustion limit
};

/// The exhaustion limit must lie below every nonnegative solution of the
/// interior equation and the physical boundary rows (no condition at the
/// artificial boundary). Throws std::invalid_argument if `candidate`
/// violates those equations on `op`.
MinimalityReport minimality_probe(const ExhaustResult& limit, const DiscreteOperator& op, double lambda,
                                  const Vector& f, const Vector& candidate, double tol = 1e-9);

}  // namespace feller
