#pragma once

#include <stdexcept>
#include <string>

namespace fitcap {

// Bad caller input: out-of-range counts, labels, tau, malformed configs.
class ArgumentError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// File content does not follow the expected binary or document layout.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Two inputs that must agree do not (image/label counts, duplicate run keys).
class ConsistencyError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Input is valid but carries no information for the requested statistic
// (zero variance across models, too few samples for a covariance).
class DegenerateInputError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

}  // namespace fitcap
