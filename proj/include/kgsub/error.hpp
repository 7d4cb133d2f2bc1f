#ifndef KGSUB_ERROR_HPP
#define KGSUB_ERROR_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace kgsub {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input line. Carries the 1-based line number.
class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

/// Invalid configuration value (e.g. zero embedding dimension).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Invalid argument to an algorithm (e.g. k > n).
class ParameterError : public Error {
public:
    using Error::Error;
};

/// Id or URI not present where it is required.
class LookupError : public Error {
public:
    using Error::Error;
};

/// Corrupt or incompatible serialized artifact.
class FormatError : public Error {
public:
    using Error::Error;
};

/// Zero-norm vector passed where a direction is required.
class DegenerateVectorError : public Error {
public:
    using Error::Error;
};

/// A pipeline stage was run before the artifacts it consumes exist.
class DependencyError : public Error {
public:
    using Error::Error;
};

/// Input data that is well-formed but unusable (empty, inconsistent).
class DataError : public Error {
public:
    using Error::Error;
};

}

#endif
