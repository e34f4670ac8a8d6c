#pragma once

#include <stdexcept>
#include <string>

namespace ucstab {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Raised when a linear solve or an iterative estimate cannot complete.
class SolverError : public Error {
public:
    using Error::Error;
};

#define UCSTAB_REQUIRE(cond, ExceptionType, msg)                                     \
    do {                                                                             \
        if (!(cond)) {                                                               \
            throw ExceptionType(std::string(__func__) + ": " + std::string(msg));    \
        }                                                                            \
    } while (false)

} // namespace ucstab
