#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace agripolicy {

/// Malformed or inconsistent user-supplied data. The CLI maps this to exit 2.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A single rejected row of a delimited input file.
class RowError : public InputError {
public:
    RowError(std::size_t line, const std::string& what)
        : InputError("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

/// Numerical failure inside an estimator (non-finite state, divergence).
/// The CLI maps this to exit 3.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace agripolicy
