#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ovit {

// Base of every error the library raises. Subclasses identify the failure
// class; what() carries the human-readable detail.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

// Raised by LU inversion when a pivot falls below the relative threshold.
class SingularityError : public Error {
public:
    SingularityError(std::size_t pivot, const std::string& what)
        : Error(what), pivot_(pivot) {}
    std::size_t pivot() const noexcept { return pivot_; }

private:
    std::size_t pivot_;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class FormatError : public Error {
public:
    using Error::Error;
};

class LengthError : public Error {
public:
    using Error::Error;
};

class LabelError : public Error {
public:
    using Error::Error;
};

class ArgumentError : public Error {
public:
    using Error::Error;
};

class PreconditionError : public Error {
public:
    using Error::Error;
};

} // namespace ovit
