#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace relfuse {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or out-of-contract input (bad belief sums, weights, files, ...).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Dempster combination of two fully conflicting mass functions.
class TotalConflictError : public Error {
public:
    TotalConflictError(const std::string& what, std::size_t fold_index, std::string path = {})
        : Error(what), fold_index_(fold_index), path_(std::move(path)) {}

    /// Index of the fold step (0-based) at which the conflict occurred.
    std::size_t fold_index() const noexcept { return fold_index_; }
    const std::string& path() const noexcept { return path_; }

private:
    std::size_t fold_index_;
    std::string path_;
};

/// Hyperparameter fitting needs at least two units.
class InsufficientDataError : public Error {
public:
    using Error::Error;
};

} // namespace relfuse
