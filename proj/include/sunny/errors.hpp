#pragma once

#include <stdexcept>
#include <string>

namespace sunny {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Raised by text-format parsers (problem files, configs, CSV, scripts).
/// Carries the 1-based line number of the offending line when known.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line)
        : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
          line_(line) {}

    explicit ParseError(const std::string& what) : ParseError(what, 0) {}

    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

}  // namespace sunny
