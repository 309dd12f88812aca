#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace geoact {

// Any failure caused by the data handed to the library (as opposed to a
// programming error). The CLI maps these to exit code 2.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ParseError : public DataError {
public:
    ParseError(std::size_t line, const std::string& what)
        : DataError("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class OutOfAreaError : public DataError {
public:
    using DataError::DataError;
};

class DegenerateLabelsError : public DataError {
public:
    using DataError::DataError;
};

class EmptyTraceError : public DataError {
public:
    using DataError::DataError;
};

class ConvergenceError : public DataError {
public:
    ConvergenceError(const std::string& what, double residual)
        : DataError(what), residual_(residual) {}

    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

class UndefinedCorrelationError : public DataError {
public:
    using DataError::DataError;
};

}  // namespace geoact
