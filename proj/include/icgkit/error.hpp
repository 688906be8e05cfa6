#pragma once

#include <stdexcept>
#include <string>

namespace icgkit {

// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed input file or stream (bad header, bad row, non-uniform sampling).
class FormatError : public Error {
public:
    using Error::Error;
};

// Unknown option, unknown feature name, bad configuration key.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Valid input that the requested computation is not defined for.
class DomainError : public Error {
public:
    using Error::Error;
};

}  // namespace icgkit
