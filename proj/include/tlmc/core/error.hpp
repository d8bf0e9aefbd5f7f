#pragma once

#include <stdexcept>
#include <string>

namespace tlmc {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid configuration or parameters (CLI exit code 2).
class ConfigError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    ParseError(const std::string& what, int line, int column)
        : Error("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + what),
          line_(line), column_(column) {}
    int line() const { return line_; }
    int column() const { return column_; }

private:
    int line_;
    int column_;
};

// Malformed binary or image payloads.
class FormatError : public Error {
public:
    using Error::Error;
};

// Non-finite losses or parameters during training (CLI exit code 3).
class DivergenceError : public Error {
public:
    using Error::Error;
};

// An operation requested on something that does not support it (e.g. pdf of a delta lobe).
class UnsupportedError : public Error {
public:
    using Error::Error;
};

}  // namespace tlmc
