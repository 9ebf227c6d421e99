#pragma once

#include <stdexcept>
#include <string>

namespace jobshop {

// Bad argument to one of the model's pure functions (negative time, unknown id, ...).
class DomainError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Instance breaks a structural invariant. `path` locates the offending field,
// e.g. "jobs[2].ops[0].setup".
class InstanceError : public std::runtime_error {
public:
    InstanceError(std::string path, const std::string& reason)
        : std::runtime_error(path.empty() ? reason : path + ": " + reason), path_(std::move(path)) {}

    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

// Action rejected by the environment because the current mask forbids it.
class MaskedActionError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// Search/table size guard tripped.
class GuardExceeded : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Training produced a non-finite loss.
class DivergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace jobshop
