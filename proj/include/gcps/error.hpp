#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gcps {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or invalid model input (syntax, validation, unsupported shape).
class ModelError : public Error {
public:
    using Error::Error;
};

/// Syntax error with a 1-based source position.
class ParseError : public ModelError {
public:
    ParseError(std::size_t line, std::size_t column, const std::string& message)
        : ModelError("line " + std::to_string(line) + ", column " + std::to_string(column) +
                     ": " + message),
          line_(line), column_(column) {}

    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }

private:
    std::size_t line_;
    std::size_t column_;
};

/// A rule was applied to a configuration that cannot supply its objects.
class RuleNotApplicable : public Error {
public:
    using Error::Error;
};

/// A step was requested from a configuration with no applicable rule.
class HaltedError : public Error {
public:
    using Error::Error;
};

/// State exploration exceeded its node cap or was refused as unbounded.
class CapacityError : public Error {
public:
    using Error::Error;
};

/// Fixed-point search ran out of time.
class ConvergenceError : public Error {
public:
    using Error::Error;
};

/// Numerical integration produced non-finite values.
class IntegrationError : public Error {
public:
    IntegrationError(const std::string& message, double last_valid_time)
        : Error(message), last_valid_time_(last_valid_time) {}

    double last_valid_time() const noexcept { return last_valid_time_; }

private:
    double last_valid_time_;
};

}  // namespace gcps
