#include "feller/operator.hpp"

#include "feller/expression.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace feller {

std::optional<BuiltinOperator> parse_builtin_operator(std::string_view name) {
    if (name == "ou") return BuiltinOperator::ou;
    if (name == "inverse-power") return BuiltinOperator::inverse_power;
    if (name == "polynomial") return BuiltinOperator::polynomial;
    if (name == "brownian") return BuiltinOperator::brownian;
    return std::nullopt;
}

const char* to_string(BuiltinOperator op) {
    switch (op) {
        case BuiltinOperator::ou: return "ou";
        case BuiltinOperator::inverse_power: return "inverse-power";
        case BuiltinOperator::polynomial: return "polynomial";
        case BuiltinOperator::brownian: return "brownian";
    }
    return "?";
}

namespace {

Matrix2 scaled_identity(int dim, double s) {
    Matrix2 a = Matrix2::Zero();
    a(0, 0) = s;
    if (dim == 2) a(1, 1) = s;
    return a;
}

}  // namespace

CoefficientField builtin_operator(BuiltinOperator op, int dimension, OperatorParams params) {
    if (dimension != 1 && dimension != 2)
        throw std::invalid_argument("operator dimension must be 1 or 2");
    CoefficientField c;
    c.name = to_string(op);
    c.dimension = dimension;
    const int d = dimension;
    switch (op) {
        case BuiltinOperator::ou:
            c.diffusion = [d](const Point&) { return scaled_identity(d, 1.0); };
            c.drift = [](const Point& x) -> Point { return -x; };
            c.eta = [](const Point&) { return 1.0; };
            break;
        case BuiltinOperator::brownian:
            c.diffusion = [d](const Point&) { return scaled_identity(d, 1.0); };
            c.drift = [](const Point&) -> Point { return Point::Zero(); };
            c.eta = [](const Point&) { return 1.0; };
            break;
        case BuiltinOperator::inverse_power: {
            const double alpha = params.alpha;
            if (!(alpha > 0.0)) throw std::invalid_argument("inverse-power requires alpha > 0");
            c.diffusion = [d, alpha](const Point& x) {
                return scaled_identity(d, std::pow(x.norm(), -alpha));
            };
            c.drift = [](const Point& x) -> Point { return -x; };
            c.eta = [alpha](const Point& x) { return std::pow(x.norm(), -alpha); };
            break;
        }
        case BuiltinOperator::polynomial: {
            const double alpha = params.alpha;
            const double beta = params.beta;
            if (!(alpha > 0.0)) throw std::invalid_argument("polynomial requires alpha > 0");
            if (!(beta > alpha - 1.0))
                throw std::invalid_argument("polynomial requires beta > alpha - 1");
            c.diffusion = [d, alpha](const Point& x) {
                return scaled_identity(d, std::pow(x.norm(), alpha));
            };
            c.drift = [beta](const Point& x) -> Point {
                return -std::pow(x.norm(), beta - 1.0) * x;
            };
            c.eta = [alpha](const Point& x) { return std::pow(x.norm(), alpha); };
            break;
        }
    }
    return c;
}

CoefficientField custom_operator(int dimension, const CustomCoefficients& e) {
    if (dimension != 1 && dimension != 2)
        throw std::invalid_argument("operator dimension must be 1 or 2");
    if (e.a11.empty() || e.eta.empty())
        throw std::invalid_argument("custom operator needs at least a11 and eta");
    auto parse_or_zero = [](const std::string& s) {
        return Expression::parse(s.empty() ? std::string("0") : s);
    };
    const Expression a11 = Expression::parse(e.a11);
    const Expression a12 = parse_or_zero(e.a12);
    const Expression a22 = dimension == 2 ? Expression::parse(e.a22.empty() ? e.a11 : e.a22)
                                          : parse_or_zero("");
    const Expression b1 = parse_or_zero(e.b1);
    const Expression b2 = parse_or_zero(e.b2);
    const Expression eta = Expression::parse(e.eta);

    CoefficientField c;
    c.name = "custom";
    c.dimension = dimension;
    if (dimension == 1) {
        c.diffusion = [a11](const Point& x) {
            Matrix2 a = Matrix2::Zero();
            a(0, 0) = a11(x);
            return a;
        };
        c.drift = [b1](const Point& x) { return Point(b1(x), 0.0); };
    } else {
        c.diffusion = [a11, a12, a22](const Point& x) {
            Matrix2 a;
            a << a11(x), a12(x), a12(x), a22(x);
            return a;
        };
        c.drift = [b1, b2](const Point& x) { return Point(b1(x), b2(x)); };
    }
    c.eta = [eta](const Point& x) { return eta(x); };
    return c;
}

EllipticityReport check_ellipticity(const CoefficientField& coeff, const Grid& grid) {
    EllipticityReport rep;
    if (grid.size() == 0) throw std::invalid_argument("check_ellipticity on an empty grid");
    const int d = coeff.dimension;
    rep.min_margin = std::numeric_limits<double>::infinity();
    rep.min_eta = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const Point& x = grid.node(i);
        const Matrix2 a = coeff.diffusion(x);
        const Point b = coeff.drift(x);
        const double eta = coeff.eta(x);
        const Eigen::MatrixXd block = a.topLeftCorner(d, d);
        if (!block.allFinite() || !b.head(d).allFinite() || !std::isfinite(eta)) {
            rep.finite = false;
            rep.worst_node = i;
            rep.message = "non-finite coefficient at node " + std::to_string(i);
            rep.pass = false;
            return rep;
        }
        if (d == 2 && std::abs(a(0, 1) - a(1, 0)) > 1e-12 * (1.0 + block.cwiseAbs().maxCoeff())) {
            rep.symmetric = false;
            rep.worst_node = i;
            rep.message = "diffusion matrix is not symmetric at node " + std::to_string(i);
            rep.pass = false;
            return rep;
        }
        const double smallest = d == 1 ? a(0, 0)
                                       : Eigen::SelfAdjointEigenSolver<Matrix2>(a, Eigen::EigenvaluesOnly)
                                             .eigenvalues()
                                             .minCoeff();
        const double margin = smallest - eta;
        if (margin < rep.min_margin) {
            rep.min_margin = margin;
            rep.worst_node = i;
        }
        rep.min_eta = std::min(rep.min_eta, eta);
    }
    // Exact equality (a = eta I) must pass, hence the relative slack.
    rep.pass = rep.min_eta > 0.0 && rep.min_margin >= -1e-12 * std::max(1.0, rep.min_eta);
    if (!rep.pass)
        rep.message = rep.min_eta > 0.0 ? "smallest eigenvalue of a below eta"
                                        : "eta is not strictly positive";
    return rep;
}

double drift_balance(const CoefficientField& coeff, const Point& x) {
    const Matrix2 a = coeff.diffusion(x);
    const Point b = coeff.drift(x);
    double s = 0.0;
    for (int j = 0; j < coeff.dimension; ++j) s += a(j, j) + b[j] * x[j];
    return s;
}

RadialTrend radial_trend(const std::function<double(const Point&)>& fn, int dimension,
                         double r_min, double r_max) {
    RadialTrend t;
    const int directions = dimension == 1 ? 1 : 8;
    for (int k = 3; k >= 0; --k) t.radii.push_back(std::max(r_min, r_max / std::pow(2.0, k)));
    std::vector<double> lo, hi;
    for (double r : t.radii) {
        double worst_hi = -std::numeric_limits<double>::infinity();
        double worst_lo = std::numeric_limits<double>::infinity();
        for (int k = 0; k < directions; ++k) {
            const double theta = 2.0 * std::numbers::pi * k / directions;
            const Point x = dimension == 1 ? Point(r, 0.0) : Point(r * std::cos(theta), r * std::sin(theta));
            const double v = fn(x);
            worst_hi = std::max(worst_hi, v);
            worst_lo = std::min(worst_lo, v);
        }
        hi.push_back(worst_hi);
        lo.push_back(worst_lo);
    }
    auto diverging = [](const std::vector<double>& v, double sign) {
        std::vector<double> step;
        for (std::size_t k = 1; k < v.size(); ++k) step.push_back(sign * (v[k] - v[k - 1]));
        for (double s : step)
            if (!(s > 0.0)) return false;
        for (std::size_t k = 1; k < step.size(); ++k)
            if (step[k] < step[k - 1] * (1.0 - 1e-9)) return false;
        return true;
    };
    t.values = hi;
    t.diverges_down = diverging(hi, -1.0);
    t.diverges_up = diverging(lo, 1.0);
    return t;
}

RadialTrend drift_balance_trend(const CoefficientField& coeff, double r_min, double r_max) {
    return radial_trend([&](const Point& x) { return drift_balance(coeff, x); }, coeff.dimension,
                        r_min, r_max);
}

}  // namespace feller
