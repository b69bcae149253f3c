#pragma once

#include <stdexcept>
#include <string>

namespace qpump {

enum class ErrorKind {
  NonUnitary,
  StencilOutOfDomain,
  PhaseUnwrapFailure,
  GridTooCoarse,
  ZeroTemperature,
  NonPulseCycle,
  MaxEventsExceeded,
  RegionTouchesDiscontinuity,
  EvanescentOverflow,
  EnergyAtBandEdge,
  SchemaError,
  InvalidSpec,
  InvariantViolation,
};

const char* to_string(ErrorKind k);

class PumpError : public std::runtime_error {
 public:
  PumpError(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// CLI exit status for an error kind.
int exit_code(ErrorKind k);

}  // namespace qpump
