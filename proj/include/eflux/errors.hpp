#pragma once

#include <stdexcept>
#include <string>

namespace eflux {

// Bad arguments: invalid flux/process specs, points outside a domain, CFL > 1.
class DomainError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Malformed or unknown configuration input.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Nested quadrature refused because the instance is too large; use Monte Carlo.
class DimensionCapError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Factorization failures, degenerate densities and similar.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace eflux
