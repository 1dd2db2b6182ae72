#pragma once

#include <stdexcept>
#include <string>

namespace odesens {

// Base of every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class RangeError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class CapabilityError : public Error {
 public:
  using Error::Error;
};

// Cholesky factorization of a weight matrix failed.
class DefinitenessError : public Error {
 public:
  using Error::Error;
};

// A model evaluator produced a non-finite value.
class EvaluationError : public Error {
 public:
  EvaluationError(const std::string& what, double t) : Error(what), time_(t) {}
  [[nodiscard]] double time() const noexcept { return time_; }

 private:
  double time_;
};

// The integrator hit a non-finite right-hand side.
class IntegrationError : public Error {
 public:
  IntegrationError(const std::string& what, double t) : Error(what), time_(t) {}
  [[nodiscard]] double time() const noexcept { return time_; }

 private:
  double time_;
};

// Adaptive step size fell below the representable minimum.
class StiffnessError : public IntegrationError {
 public:
  using IntegrationError::IntegrationError;
};

}  // namespace odesens
