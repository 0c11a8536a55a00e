#pragma once

#include <stdexcept>
#include <string>

namespace pfl {

// Error categories map onto CLI exit codes: config -> 2, data -> 3, numeric -> 4.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& m) : std::runtime_error(m) {}
};

struct DataError : std::runtime_error {
    explicit DataError(const std::string& m) : std::runtime_error(m) {}
};

struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& m) : std::runtime_error(m) {}
};

struct UnsupportedOperation : std::runtime_error {
    explicit UnsupportedOperation(const std::string& m) : std::runtime_error(m) {}
};

}  // namespace pfl
