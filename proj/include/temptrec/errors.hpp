#pragma once

#include <stdexcept>
#include <string>

namespace temptrec {

// Bad parameters: mismatched dimensions, sigma <= 0, malformed configs.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

// A round that breaks the consumption contract (consumed item offered, no options at all).
class ContractError : public std::logic_error {
 public:
  explicit ContractError(const std::string& what) : std::logic_error(what) {}
};

// Unusable input data: empty datasets, malformed files, missing paths.
class InputError : public std::runtime_error {
 public:
  explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

// Optimisation blew up (non-finite loss).
class TrainingError : public std::runtime_error {
 public:
  explicit TrainingError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace temptrec
