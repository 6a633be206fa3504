#pragma once

#include <stdexcept>
#include <string>

namespace cpm {

// Base of every recoverable failure raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Deposition hit its disk budget before reaching the requested fraction.
class SaturationError : public Error {
 public:
  using Error::Error;
};

class NonConvergence : public Error {
 public:
  NonConvergence(const std::string& what, long iterations, double residual)
      : Error(what), iterations_(iterations), residual_(residual) {}
  long iterations() const { return iterations_; }
  double residual() const { return residual_; }

 private:
  long iterations_;
  double residual_;
};

// Horizontal cut currents disagree by more than the allowed spread.
class InconsistentFlux : public Error {
 public:
  InconsistentFlux(const std::string& what, double spread)
      : Error(what), spread_(spread) {}
  double relative_spread() const { return spread_; }

 private:
  double spread_;
};

class DegenerateData : public Error {
 public:
  using Error::Error;
};

class EmptyMask : public Error {
 public:
  using Error::Error;
};

class InsufficientScales : public Error {
 public:
  using Error::Error;
};

// Wraps an upstream failure with the volume fraction it occurred at.
class SweepPointError : public Error {
 public:
  SweepPointError(double p, const std::string& cause)
      : Error("p=" + std::to_string(p) + ": " + cause), p_(p) {}
  double p() const { return p_; }

 private:
  double p_;
};

}  // namespace cpm
