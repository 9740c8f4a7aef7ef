#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace finsup {

/// Raised when a weight vector cannot define a probability law
/// (all zero, negative entries, NaN/inf, or malformed support).
struct InvalidWeights : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Raised on nonpositive or unreachable tolerances.
struct InvalidTolerance : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Raised when a sample does not match the shape a statistic requires.
struct InvalidSample : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Raised when an exhaustive computation would exceed its enumeration budget.
struct TooLarge : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Raised by the classifier on laws without exact rational atoms.
struct NotClassifiable : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Mixed exact/real arithmetic or an int64 overflow in torus fractions.
struct TorusArithmeticError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed experiment configuration (CLI exit code 2).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A verified schedule rank exceeded its analytic bound (CLI exit code 3).
struct VerificationFailure : std::runtime_error {
  VerificationFailure(std::int64_t rank_in, const std::string& what_in)
      : std::runtime_error(what_in), rank(rank_in) {}
  std::int64_t rank;
};

}  // namespace finsup
