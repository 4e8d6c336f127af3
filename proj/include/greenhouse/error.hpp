#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace greenhouse {

/// Caller passed arguments that violate an operation's preconditions.
class UsageError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Base for problems with input data or serialized artifacts.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed CSV row (wrong arity, non-numeric field).
class ParseError : public DataError {
public:
    ParseError(std::size_t row, const std::string& what)
        : DataError("row " + std::to_string(row) + ": " + what), row_(row) {}
    std::size_t row() const noexcept { return row_; }

private:
    std::size_t row_;
};

/// A moisture value outside [0,1].
class RangeError : public DataError {
public:
    RangeError(std::size_t row, std::string column, double value)
        : DataError("row " + std::to_string(row) + ": " + column + " = " + std::to_string(value) +
                    " outside [0,1]"),
          row_(row), column_(std::move(column)) {}
    std::size_t row() const noexcept { return row_; }
    const std::string& column() const noexcept { return column_; }

private:
    std::size_t row_;
    std::string column_;
};

/// Not enough pairs for the requested split.
class SizingError : public UsageError {
public:
    SizingError(std::size_t requested, std::size_t available)
        : UsageError(std::to_string(requested) + " > " + std::to_string(available) +
                     " (available pairs)"),
          requested_(requested), available_(available) {}
    std::size_t requested() const noexcept { return requested_; }
    std::size_t available() const noexcept { return available_; }

private:
    std::size_t requested_;
    std::size_t available_;
};

/// Model file or scenario file that cannot be read back.
class FormatError : public DataError {
public:
    using DataError::DataError;
};

}  // namespace greenhouse
