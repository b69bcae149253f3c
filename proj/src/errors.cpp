#include "qpump/errors.hpp"

namespace qpump {

const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::NonUnitary: return "NonUnitary";
    case ErrorKind::StencilOutOfDomain: return "StencilOutOfDomain";
    case ErrorKind::PhaseUnwrapFailure: return "PhaseUnwrapFailure";
    case ErrorKind::GridTooCoarse: return "GridTooCoarse";
    case ErrorKind::ZeroTemperature: return "ZeroTemperature";
    case ErrorKind::NonPulseCycle: return "NonPulseCycle";
    case ErrorKind::MaxEventsExceeded: return "MaxEventsExceeded";
    case ErrorKind::RegionTouchesDiscontinuity: return "RegionTouchesDiscontinuity";
    case ErrorKind::EvanescentOverflow: return "EvanescentOverflow";
    case ErrorKind::EnergyAtBandEdge: return "EnergyAtBandEdge";
    case ErrorKind::SchemaError: return "SchemaError";
    case ErrorKind::InvalidSpec: return "InvalidSpec";
    case ErrorKind::InvariantViolation: return "InvariantViolation";
  }
  return "Unknown";
}

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::SchemaError:
    case ErrorKind::InvalidSpec:
      return 2;
    case ErrorKind::NonUnitary:
    case ErrorKind::PhaseUnwrapFailure:
    case ErrorKind::GridTooCoarse:
    case ErrorKind::InvariantViolation:
    case ErrorKind::EvanescentOverflow:
    case ErrorKind::EnergyAtBandEdge:
      return 3;
    case ErrorKind::ZeroTemperature:
    case ErrorKind::NonPulseCycle:
    case ErrorKind::RegionTouchesDiscontinuity:
    case ErrorKind::StencilOutOfDomain:
      return 4;
    case ErrorKind::MaxEventsExceeded:
      return 5;
  }
  return 1;
}

}  // namespace qpump
