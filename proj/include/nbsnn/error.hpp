#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace nbsnn {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed batch-file line. line() is 1-based.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Dataset directory does not match the expected batch census.
struct CensusError : Error {
  using Error::Error;
};

struct NumericError : Error {
  using Error::Error;
};

struct ShapeError : Error {
  using Error::Error;
};

struct CheckpointError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

}  // namespace nbsnn
