#pragma once

#include <stdexcept>
#include <string>

namespace al {

// Bad arguments to an operation (out-of-range class ids, dimension mismatches).
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Inconsistent experiment or strategy configuration, detected before work starts.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed dataset, config or checkpoint file.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace al
