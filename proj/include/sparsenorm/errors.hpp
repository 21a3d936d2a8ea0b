#pragma once

#include <stdexcept>
#include <string>

namespace sparsenorm {

// Argument outside the mathematical domain of an operation.
class DomainError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Input vectors whose lengths disagree.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Sample on which the dyadic threshold is undefined (median square is zero).
class DegenerateSampleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Estimator requested outside the regime where it is defined.
class RegimeError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// Malformed experiment configuration text.
class ConfigParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Well-formed configuration with invalid values.
class ConfigValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace sparsenorm
