#pragma once

#include <stdexcept>
#include <string>

namespace clauseforge {

// Base of every error thrown by the library. Subclasses exist so callers
// (and tests) can tell configuration mistakes from corrupt inputs.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class SchemaError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class StaleCacheError : public Error {
 public:
  using Error::Error;
};

}  // namespace clauseforge
