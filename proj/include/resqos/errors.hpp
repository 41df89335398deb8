#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace resqos {

// Error taxonomy mirrored by the CLI exit codes: 2 config, 3 data, 4 numeric.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Parse failure with 0-based grid coordinates, for matrix and table readers.
struct ParseError : DataError {
  ParseError(const std::string& msg, std::size_t row_, std::size_t col_)
      : DataError(msg + " (row " + std::to_string(row_) + ", col " +
                  std::to_string(col_) + ")"),
        row(row_),
        col(col_) {}

  std::size_t row;
  std::size_t col;
};

}  // namespace resqos
