#pragma once

#include <stdexcept>
#include <string>

namespace fracwave {

// Base class for every error raised by the library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain of an operation.
struct DomainError : Error {
  using Error::Error;
};

// Adaptive refinement exhausted its panel or iteration budget.
struct ConvergenceError : Error {
  using Error::Error;
};

// An improper integral whose integrand does not decay fast enough.
struct DivergenceError : Error {
  using Error::Error;
};

// Dense factorization failed even after the largest jitter level.
struct FactorizationError : Error {
  FactorizationError(const std::string& what, double jitter)
      : Error(what), final_jitter(jitter) {}
  double final_jitter;
};

// Regression input without enough distinct abscissae.
struct DegenerateInputError : DomainError {
  using DomainError::DomainError;
};

// (sigma_U, sigma_V, rho) do not describe a Gaussian pair.
struct InvalidTriangleError : DomainError {
  using DomainError::DomainError;
};

// Two distinct atoms of a discrete measure sit on the same point.
struct OverlapError : DomainError {
  using DomainError::DomainError;
};

// Experiment configuration problem; `field` names the offending JSON path.
struct ConfigError : Error {
  ConfigError(const std::string& field, const std::string& what)
      : Error(field.empty() ? what : field + ": " + what), field(field) {}
  std::string field;
};

}  // namespace fracwave
