#pragma once

#include <stdexcept>
#include <string>

namespace syncmargin {

/// Invalid argument or configuration value.
class ParameterError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A caller broke a documented precondition (e.g. asymmetric matrix handed to a symmetric solver).
class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Random graph generation gave up (e.g. no connected sample within the retry budget).
class GenerationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Iterative method failed to converge, or a result is numerically meaningless.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class UnsupportedOperation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Malformed input file.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace syncmargin
