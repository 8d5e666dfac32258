#pragma once

#include <stdexcept>
#include <string>

namespace sbx {

// Invalid configuration values (window shape, lattice, filter bank sizing).
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Data handed to an operation does not satisfy its preconditions.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Dataset or run configuration cannot be honored (e.g. a class with too few files).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed file contents (WAV, SBXT, SBXM, manifests, transform banks).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sbx
