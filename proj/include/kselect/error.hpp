#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace kselect {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input text (Matrix Market, CSV, serialized trees, config files).
/// `line()` is 1-based; 0 means the location is unknown.
class ParseError : public Error {
public:
    explicit ParseError(const std::string& what, std::size_t line = 0)
        : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what), line_(line)
    {
    }

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Well-formed input that does not fit what the consumer expects
/// (feature schema, kernel vocabulary, join keys).
class SchemaError : public Error {
public:
    using Error::Error;
};

/// An operation received an empty collection where at least one element is required.
class EmptyInputError : public Error {
public:
    using Error::Error;
};

} // namespace kselect
