#pragma once

#include <stdexcept>
#include <string>

namespace mfgcvx {

// Precondition and argument violations are reported as std::invalid_argument.
// The two types below cover failures that are not the caller's fault.

/// A computation produced something unusable (non-finite value, lost
/// positivity, stalled line search).
class numerical_error : public std::runtime_error {
public:
    explicit numerical_error(const std::string& what) : std::runtime_error(what) {}
};

/// Reading or writing an artifact failed.
class io_error : public std::runtime_error {
public:
    explicit io_error(const std::string& what) : std::runtime_error(what) {}
};

} // namespace mfgcvx
