#pragma once

#include <stdexcept>
#include <string>

namespace trialineq {

/// Bad configuration: missing files, malformed options, invalid stage lists.
/// CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Input data fails validation (unknown codes, malformed rows, empty input).
/// CLI maps this to exit code 3.
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Numerical failure: singular designs, undefined statistics, empty domains.
/// CLI maps this to exit code 4.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

/// One rejected or suspect input row, reported with its source line.
struct RowIssue {
    std::size_t line = 0;
    std::string message;
};

} // namespace trialineq
