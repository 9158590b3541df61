#pragma once

#include "feller/config.hpp"

#include <functional>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace feller {

/// Exit codes of the command-line front end.
enum ExitCode : int { exit_ok = 0, exit_property_failure = 1, exit_config_error = 2, exit_numerical_failure = 3 };

const std::vector<std::string>& subcommands();

using NamedFunction = std::pair<std::string, std::function<double(const Point&)>>;

/// Bounded test functions shared by the PDE/Monte Carlo comparisons.
std::vector<NamedFunction> test_dictionary();

struct PropertyResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

/// The property suite behind `verify`.
std::vector<PropertyResult> verify_properties(const RunConfig& config);

/// Runs one subcommand, writing its artifacts into `out_dir` (created if
/// needed). Returns an ExitCode; configuration and numerical errors are
/// reported on `log` and mapped to their exit codes.
int run(const std::string& subcommand, const RunConfig& config, const std::string& out_dir, std::ostream& log);

}  // namespace feller
