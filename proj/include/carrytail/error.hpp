#pragma once

#include <stdexcept>
#include <string>

namespace carrytail {

/// Malformed or inconsistent input (files, arguments, domain preconditions).
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A numerical procedure could not produce a result (no bracket, no finite value).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Requested combination is valid in principle but not supported.
class UnsupportedError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace carrytail
