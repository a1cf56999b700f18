#pragma once

#include <stdexcept>
#include <string>

namespace dpt {

// Base of every error thrown by the library. Subclasses name the failed
// contract so callers can dispatch on the type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TraceError : public Error { using Error::Error; };
class NotHermitian : public Error { using Error::Error; };
class NotPSD : public Error { using Error::Error; };
class QuadratureError : public Error { using Error::Error; };
class NegativeProbability : public Error { using Error::Error; };
class ShapeMismatch : public Error { using Error::Error; };
class InvalidArgument : public Error { using Error::Error; };

// Solver-side failures.
class Boundary : public Error { using Error::Error; };
class SingularSystem : public Error { using Error::Error; };
class StepStalled : public Error { using Error::Error; };
class InfeasibleStart : public Error { using Error::Error; };

class ConfigError : public Error { using Error::Error; };
class IoError : public Error { using Error::Error; };

}  // namespace dpt
