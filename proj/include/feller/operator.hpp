#pragma once

#include "feller/common.hpp"
#include "feller/geometry.hpp"

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace feller {

/// Coefficients of  A u = sum a_ij D_i D_j u + sum b_j D_j u  together with the
/// ellipticity bound eta. In one dimension only the (0,0) entry of a and the
/// first entry of b are read.
struct CoefficientField {
    std::string name;
    int dimension = 1;
    std::function<Matrix2(const Point&)> diffusion;
    std::function<Point(const Point&)> drift;
    std::function<double(const Point&)> eta;
};

enum class BuiltinOperator { ou, inverse_power, polynomial, brownian };

struct OperatorParams {
    double alpha = 0.0;
    double beta = 0.0;
};

std::optional<BuiltinOperator> parse_builtin_operator(std::string_view name);
const char* to_string(BuiltinOperator op);

/// ou:            a = I,          b = -x
/// inverse-power: a = |x|^-a I,   b = -x
/// polynomial:    a = |x|^a I,    b = -|x|^(b-1) x   (requires a > 0, b > a - 1)
/// brownian:      a = I,          b = 0
CoefficientField builtin_operator(BuiltinOperator op, int dimension, OperatorParams params = {});

/// Expression strings for a user-supplied operator. Empty strings mean zero
/// (a12, b2) or are rejected (a11, eta).
struct CustomCoefficients {
    std::string a11, a12, a22, b1, b2, eta;

    bool operator==(const CustomCoefficients&) const = default;
};

CoefficientField custom_operator(int dimension, const CustomCoefficients& exprs);

struct EllipticityReport {
    bool symmetric = true;
    bool finite = true;
    bool pass = false;
    double min_margin = 0.0;  ///< min over nodes of (smallest eigenvalue of a) - eta
    double min_eta = 0.0;
    std::size_t worst_node = 0;
    std::string message;
};

EllipticityReport check_ellipticity(const CoefficientField& coeff, const Grid& grid);

/// sum_j a_jj(x) + b_j(x) x_j
double drift_balance(const CoefficientField& coeff, const Point& x);

/// Samples of a radial profile at doubling radii R/8, R/4, R/2, R.
struct RadialTrend {
    std::vector<double> radii;
    std::vector<double> values;      ///< worst case over sampled directions
    bool diverges_down = false;      ///< strictly decreasing with non-shrinking decrements
    bool diverges_up = false;        ///< strictly increasing with non-shrinking increments
};

RadialTrend radial_trend(const std::function<double(const Point&)>& fn, int dimension,
                         double r_min, double r_max);

RadialTrend drift_balance_trend(const CoefficientField& coeff, double r_min, double r_max);

}  // namespace feller
