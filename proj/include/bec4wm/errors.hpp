#pragma once

#include <stdexcept>
#include <string>

namespace bec4wm {

/// Bad input: malformed configuration, inconsistent parameters, unknown preset.
class ConfigError : public std::invalid_argument {
public:
    explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

/// A numerical procedure failed: no convergence, divergence, empty domain.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

/// A validation check ran but its acceptance test did not pass.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace bec4wm
