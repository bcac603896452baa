#pragma once

#include <stdexcept>
#include <string>

namespace alloyfit {

/// Bad command-line usage or configuration. CLI exit code 1.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or invalid input data. CLI exit code 2.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A CSV field that failed to parse; carries the 1-based row and the column name.
class ParseError : public DataError {
public:
    ParseError(std::size_t row, std::string column, const std::string& what)
        : DataError("row " + std::to_string(row) + ", column '" + column + "': " + what),
          row_(row), column_(std::move(column)) {}

    std::size_t row() const noexcept { return row_; }
    const std::string& column() const noexcept { return column_; }

private:
    std::size_t row_;
    std::string column_;
};

/// Singular systems, divergence and similar. CLI exit code 3.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace alloyfit
