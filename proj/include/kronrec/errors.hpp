#pragma once

#include <stdexcept>
#include <string>

namespace kronrec {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operands do not fit the group they are used with.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// A configured size cap (group order, subset count, ...) was exceeded.
class CapExceeded : public Error {
public:
    using Error::Error;
};

/// Numerical decision rules disagree with each other, e.g. two different
/// integer relations explain the same frequency.
class ToleranceConflict : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    ConfigError(int line, const std::string& what, const std::string& file = {})
        : Error(location(line, file) + what), line_(line), detail_(what) {}
    int line() const { return line_; }
    /// Message without the line prefix.
    const std::string& detail() const { return detail_; }

private:
    static std::string location(int line, const std::string& file) {
        if (file.empty()) return line > 0 ? "line " + std::to_string(line) + ": " : "";
        return line > 0 ? file + ":" + std::to_string(line) + ": " : file + ": ";
    }

    int line_;
    std::string detail_;
};

class VerificationFailure : public Error {
public:
    using Error::Error;
};

}  // namespace kronrec
