#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace v2g {

/// Malformed input document (schema violation, bad CSV cell, ...).
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Structurally valid input that breaks a model invariant. Carries every
/// failure found, not just the first.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(std::vector<std::string> failures);
    const std::vector<std::string>& failures() const noexcept { return failures_; }

private:
    std::vector<std::string> failures_;
};

/// Bad run configuration: missing file, unsorted years, unknown option.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Domain-level precondition failure inside a model operation.
class ModelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace v2g
