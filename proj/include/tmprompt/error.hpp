#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace tmprompt {

using Tokens = std::vector<std::string>;

// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed, truncated or wrong-version on-disk data.
class FormatError : public Error {
 public:
  using Error::Error;
};

// A precondition on an argument was violated.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// A translation model broke its contract (bad distribution, unknown token).
class ModelError : public Error {
 public:
  using Error::Error;
};

}  // namespace tmprompt
