#pragma once

#include <stdexcept>
#include <string>

namespace qsmooth {

/// Base class for all library errors.
class error : public std::runtime_error {
public:
    explicit error(const std::string& msg) : std::runtime_error(msg) {}
};

/// A value failed its type invariants (non-Hermitian state, bad trace, ...).
class validation_error : public error {
public:
    explicit validation_error(const std::string& msg) : error(msg) {}
};

/// Bad user-facing configuration (grid, preset, key=value file). CLI exit code 2.
class config_error : public error {
public:
    explicit config_error(const std::string& msg) : error(msg) {}
};

/// Numerical failure at runtime (integrator step, solver non-convergence). CLI exit code 3.
class numerical_error : public error {
public:
    explicit numerical_error(const std::string& msg) : error(msg) {}
};

/// A jump was requested from a state that assigns it zero probability.
class impossible_jump_error : public numerical_error {
public:
    explicit impossible_jump_error(const std::string& msg) : numerical_error(msg) {}
};

/// Filtered/retrofiltered quantities assign zero probability to the record.
class inconsistent_record_error : public numerical_error {
public:
    explicit inconsistent_record_error(const std::string& msg) : numerical_error(msg) {}
};

/// A retrofiltered effect collapsed to zero under a jump update.
class degenerate_effect_error : public numerical_error {
public:
    explicit degenerate_effect_error(const std::string& msg) : numerical_error(msg) {}
};

} // namespace qsmooth
