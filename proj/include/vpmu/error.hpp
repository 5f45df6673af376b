#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace vpmu {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Wire-level decode failures.
class FramingError : public Error {
 public:
  using Error::Error;
};
class LengthError : public Error {
 public:
  using Error::Error;
};
class IntegrityError : public Error {
 public:
  using Error::Error;
};
class UnknownCommandError : public Error {
 public:
  using Error::Error;
};
class OverflowError : public Error {
 public:
  using Error::Error;
};

// Resource-level failures of a virtual object.
class NoDataError : public Error {
 public:
  using Error::Error;
};
class SelectorError : public Error {
 public:
  using Error::Error;
};

class UnobservableError : public Error {
 public:
  UnobservableError(const std::string& what, std::size_t pivot)
      : Error(what), pivot_(pivot) {}
  std::size_t pivot_index() const noexcept { return pivot_; }

 private:
  std::size_t pivot_;
};

}  // namespace vpmu
