#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace entrograph {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Precondition violation on an argument (bad horizon, empty list, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t position)
      : Error(message + " at position " + std::to_string(position)),
        message_(message),
        position_(position) {}

  const std::string& message() const { return message_; }
  std::size_t position() const { return position_; }

 private:
  std::string message_;
  std::size_t position_;
};

class UnknownSystem : public Error {
 public:
  using Error::Error;
};

class InvalidConfig : public Error {
 public:
  using Error::Error;
};

class FamilyError : public Error {
 public:
  using Error::Error;
};

// Numerical routine could not reach its tolerance.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace entrograph
