#pragma once

#include <stdexcept>
#include <string>

namespace wavesens {

/// Invalid user input (grid, config, shapes). Maps to CLI exit code 1.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Instability, NaN/Inf or a failed numerical procedure. Exit code 2.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A memory or storage budget would be exceeded. Exit code 3.
class BudgetError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace wavesens
