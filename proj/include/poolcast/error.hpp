#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace poolcast {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input text; carries the 1-based line number when known.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
    explicit ParseError(const std::string& what) : Error(what) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_ = 0;
};

class SchemaError : public Error {
    using Error::Error;
};

/// Two or more consecutive hours missing; the repair rule cannot fill them.
class GapError : public Error {
    using Error::Error;
};

class ConfigError : public Error {
    using Error::Error;
};

class DesignError : public Error {
    using Error::Error;
};

class FitError : public Error {
    using Error::Error;
};

class ForecastError : public Error {
    using Error::Error;
};

class SolverError : public Error {
    using Error::Error;
};

class AlignmentError : public Error {
    using Error::Error;
};

/// A metric is undefined for its inputs (e.g. a zero benchmark MAE).
class MetricError : public Error {
    using Error::Error;
};

}  // namespace poolcast
