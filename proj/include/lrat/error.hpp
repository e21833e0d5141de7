#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lrat {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad caller input: missing files, malformed records, invalid parameters.
/// The CLI maps this to exit code 2.
class InputError : public Error {
public:
    using Error::Error;
};

/// A record in a line-delimited file could not be decoded or violated a
/// schema or model invariant.
class ParseError : public InputError {
public:
    ParseError(std::size_t line, const std::string& what)
        : InputError("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Non-finite loss or parameter during training.
class NumericError : public Error {
public:
    using Error::Error;
};

}  // namespace lrat
