#pragma once

#include <stdexcept>
#include <string>

namespace framesel {

// Error families map 1:1 onto CLI exit codes (see tools/framesel.cpp).
enum class ErrorCategory {
    config  = 2,
    io      = 3,
    format  = 4,
    shape   = 5,
    numeric = 6,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCategory cat, const std::string& msg) : std::runtime_error(msg), cat_(cat) {}
    ErrorCategory category() const { return cat_; }
    int exit_code() const { return static_cast<int>(cat_); }

private:
    ErrorCategory cat_;
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error(ErrorCategory::config, msg) {}
};
struct IoError : Error {
    explicit IoError(const std::string& msg) : Error(ErrorCategory::io, msg) {}
};
struct FormatError : Error {
    explicit FormatError(const std::string& msg) : Error(ErrorCategory::format, msg) {}
};
struct ShapeError : Error {
    explicit ShapeError(const std::string& msg) : Error(ErrorCategory::shape, msg) {}
};
struct NumericError : Error {
    explicit NumericError(const std::string& msg) : Error(ErrorCategory::numeric, msg) {}
};

} // namespace framesel
