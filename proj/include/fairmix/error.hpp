#pragma once

#include <functional>
#include <iostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace fairmix {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
    using std::runtime_error::runtime_error;
};

class InvalidDimensionError : public Error {
 public:
    using Error::Error;
};

class DomainError : public Error {
 public:
    using Error::Error;
};

/// Inputs that make an operation undefined (all-zero losses, no observed clients, ...).
class DegenerateInputError : public Error {
 public:
    using Error::Error;
};

class NumericalFailureError : public Error {
 public:
    using Error::Error;
};

/// Iterative solver ran out of iterations; carries the best iterate found.
class NonConvergenceError : public Error {
 public:
    NonConvergenceError(const std::string& what, std::vector<double> best, double residual)
        : Error(what), best_(std::move(best)), residual_(residual) {}

    const std::vector<double>& best() const noexcept { return best_; }
    double residual() const noexcept { return residual_; }

 private:
    std::vector<double> best_;
    double residual_;
};

/// Local training produced a non-finite loss.
class DivergenceError : public Error {
 public:
    DivergenceError(const std::string& what, std::size_t client, std::size_t round)
        : Error(what), client_(client), round_(round) {}

    std::size_t client() const noexcept { return client_; }
    std::size_t round() const noexcept { return round_; }

 private:
    std::size_t client_;
    std::size_t round_;
};

class ParseError : public Error {
 public:
    ParseError(const std::string& what, int line = -1, int column = -1)
        : Error(line >= 0 ? what + " (line " + std::to_string(line + 1) + ", column " +
                                std::to_string(column + 1) + ")"
                          : what),
          line_(line),
          column_(column) {}

    /// Zero-based; -1 when unknown.
    int line() const noexcept { return line_; }
    int column() const noexcept { return column_; }

 private:
    int line_;
    int column_;
};

class IoError : public Error {
 public:
    using Error::Error;
};

/// Violated internal invariant (a bug, not a user error).
class InvariantError : public Error {
 public:
    using Error::Error;
};

// Warning sink. Defaults to stderr; tests swap it to capture messages.
using WarningHandler = std::function<void(const std::string&)>;

inline WarningHandler& warning_handler() {
    static WarningHandler handler = [](const std::string& msg) {
        std::cerr << "warning: " << msg << '\n';
    };
    return handler;
}

inline void warn(const std::string& msg) {
    if (warning_handler()) warning_handler()(msg);
}

/// Installs a handler for the lifetime of the guard, restoring the previous one on exit.
class ScopedWarningHandler {
 public:
    explicit ScopedWarningHandler(WarningHandler handler)
        : previous_(std::exchange(warning_handler(), std::move(handler))) {}
    ~ScopedWarningHandler() { warning_handler() = std::move(previous_); }

    ScopedWarningHandler(const ScopedWarningHandler&) = delete;
    ScopedWarningHandler& operator=(const ScopedWarningHandler&) = delete;

 private:
    WarningHandler previous_;
};

}  // namespace fairmix
