#pragma once

#include <stdexcept>
#include <string>

namespace acsmc {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad argument: non-finite input, dimension mismatch, parameter outside support.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent configuration file.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A file could not be read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// A factorization failed (matrix not symmetric positive definite).
class DecompositionError : public Error {
 public:
  using Error::Error;
};

/// A policy no longer satisfies the positive-definiteness constraints its
/// twisted proposals require.
class PolicyInvariantError : public Error {
 public:
  using Error::Error;
};

/// Every particle weight at some time step is zero.
class DegenerateWeights : public Error {
 public:
  DegenerateWeights(int time, const std::string& what)
      : Error(what), time_(time) {}
  int time() const noexcept { return time_; }

 private:
  int time_;
};

/// A particle weight evaluated to NaN or +inf.
class NonFiniteWeight : public Error {
 public:
  NonFiniteWeight(int time, int particle, const std::string& what)
      : Error(what), time_(time), particle_(particle) {}
  int time() const noexcept { return time_; }
  int particle() const noexcept { return particle_; }

 private:
  int time_;
  int particle_;
};

/// Annealing stage failure; carries the stage index of the ladder.
class StageFailure : public Error {
 public:
  StageFailure(int stage, const std::string& what) : Error(what), stage_(stage) {}
  int stage() const noexcept { return stage_; }

 private:
  int stage_;
};

}  // namespace acsmc
