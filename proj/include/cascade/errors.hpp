#pragma once

#include <stdexcept>
#include <string>

namespace cascade {

/// Bad input files, malformed configuration, or violated preconditions.
/// The CLI maps this to exit code 2.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A run that started but could not complete (e.g. backend hard failure
/// under a strict policy). The CLI maps this to exit code 1.
class EvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace cascade
