#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <exception>
#include <stdexcept>
#include <string>

namespace feller {

/// Points are stored in R^2; one-dimensional problems leave the second
/// coordinate at zero so that |x| and dot products need no special casing.
using Point = Eigen::Vector2d;
using Matrix2 = Eigen::Matrix2d;
using Vector = Eigen::VectorXd;

/// Selects between the OpenMP kernel and its serial reference.
enum class Exec { serial, parallel };

/// Calls fn(0), ..., fn(count - 1), across OpenMP threads under
/// Exec::parallel. The first exception thrown by any call is rethrown once
/// the loop has finished.
template <class F>
void for_each_index(Exec exec, std::size_t count, F&& fn) {
    if (exec == Exec::serial) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::exception_ptr error;
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(count); ++i) {
        try {
            fn(static_cast<std::size_t>(i));
        } catch (...) {
#pragma omp critical(feller_for_each_index)
            if (!error) error = std::current_exception();
        }
    }
    if (error) std::rethrow_exception(error);
}

/// Raised when a configuration value is missing, unknown or out of range.
class ConfigError : public std::invalid_argument {
public:
    ConfigError(std::string key, const std::string& what)
        : std::invalid_argument(what), key_(std::move(key)) {}
    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

/// Raised when a factorization fails or a post-solve contract is violated.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace feller
