#pragma once

#include <stdexcept>
#include <string>

namespace windcast {

/// Tensor extents disagree with what an operation requires.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Argument outside an operation's domain (bad permutation, zero divisor, ...).
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Model, split or run configuration that cannot be realized.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or corrupt weight file.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// CSV ingestion failure; the message names the first offending row.
class IngestionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Training produced a non-finite loss.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(const std::string& what, int epoch, int batch)
        : std::runtime_error(what), epoch_(epoch), batch_(batch) {}

    int epoch() const noexcept { return epoch_; }
    int batch() const noexcept { return batch_; }

private:
    int epoch_;
    int batch_;
};

} // namespace windcast
