#pragma once

#include <stdexcept>
#include <string>

namespace nsnet {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller passed data that violates an operation's precondition.
class InputError : public Error {
 public:
  using Error::Error;
};

/// A configuration value is out of range.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Reading or writing a file or stream failed.
class IoError : public Error {
 public:
  using Error::Error;
};

enum class ParseErrc {
  bad_magic,
  unknown_version,
  truncated,
  duplicate_id,
  non_finite,
  invalid_field,
};

const char* to_string(ParseErrc code);

/// A binary or text file did not decode. `code()` identifies the failure.
class ParseError : public Error {
 public:
  ParseError(ParseErrc code, const std::string& what)
      : Error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ParseErrc code() const noexcept { return code_; }

 private:
  ParseErrc code_;
};

}  // namespace nsnet
