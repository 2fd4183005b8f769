#pragma once

#include <stdexcept>
#include <string>

namespace aif {

/// Base of every error raised by the simulator.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on a numeric argument was violated.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A device command or pose lies outside the device's mechanical range.
class RangeError : public Error {
 public:
  using Error::Error;
};

/// The compound system has zero net power.
class AfocalError : public Error {
 public:
  using Error::Error;
};

/// No tunable-lens power in range brings the requested distance into focus.
class OutOfFocusRange : public Error {
 public:
  OutOfFocusRange(const std::string& what, double nearest_mm)
      : Error(what), nearest_achievable_mm(nearest_mm) {}
  double nearest_achievable_mm;
};

/// The mirror cannot steer the requested eye into the lens.
class UnreachablePose : public Error {
 public:
  using Error::Error;
};

class SegmentationError : public Error {
 public:
  using Error::Error;
};

/// Two codes share no unmasked bits.
class ComparisonError : public Error {
 public:
  using Error::Error;
};

class PlanningError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace aif
