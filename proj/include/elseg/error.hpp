#pragma once

#include <stdexcept>
#include <string>

namespace elseg {

/// Caller passed a value that violates an operation's precondition.
class ArgumentError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// File could not be opened, read, or written.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// File was readable but its contents are malformed or unsupported.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Too few unique points, or all points collinear.
class DegenerateGeometryError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Data failed a structural check (annotation bounds, id alignment, config fields).
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class TrainingDivergedError : public std::runtime_error {
public:
    TrainingDivergedError(int epoch, const std::string& what)
        : std::runtime_error(what), epoch_(epoch) {}
    int epoch() const noexcept { return epoch_; }

private:
    int epoch_;
};

class NotFoundError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Optimistic-concurrency version precondition failed.
class ConflictError : public std::runtime_error {
public:
    ConflictError(const std::string& what, long current_version)
        : std::runtime_error(what), current_version_(current_version) {}
    long current_version() const noexcept { return current_version_; }

private:
    long current_version_;
};

}  // namespace elseg
