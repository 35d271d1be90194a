#pragma once

#include <stdexcept>
#include <string>

namespace waveuie {

/// Tensor or image extents disagree with what an operation requires.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Input lies outside the mathematical domain of an operation
/// (zero-sized output, negative depth, ...).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// API misuse: calling backward on a non-scalar, stepping without gradients, ...
class UsageError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// File could not be read, decoded, written or validated.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Non-finite values surfaced during training or evaluation.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace waveuie
