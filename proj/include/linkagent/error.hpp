#pragma once

#include <stdexcept>
#include <string>

namespace linkagent {

/// Invalid or inconsistent configuration (bad grid entry, unknown key, missing file).
/// The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg, std::string field = {})
        : std::runtime_error(msg), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

/// A value that breaks a domain invariant (e.g. coding/code-rate mismatch).
class InvariantError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Zero-forcing on a rank-deficient effective channel.
class NumericalSingularity : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Stored reward does not match the reward recomputed from its report.
class IntegrityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Persisted file cannot be used (corrupt, wrong version).
class PersistenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace linkagent
