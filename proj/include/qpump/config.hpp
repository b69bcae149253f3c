#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "qpump/classical.hpp"
#include "qpump/models.hpp"
#include "qpump/quadrature.hpp"
#include "qpump/transport.hpp"

namespace qpump {

enum class OutputFormat { Csv, Json };

struct ClassicalConfig {
  PlowSpec plow{1.3, 0.01 * 1.4142135623730951, 1.0};
  double t0 = -3.0, t1 = 3.0;  // label window for the charge
  double temperature = 0.02;   // g = ρ/2π needs T > 0
  int partition_grid = 24;     // samples per axis in the partition table
  double delta_phi = 0.1;      // battery demo
  double t_on = 0.0;
};

struct RunConfig {
  ModelSpec model;
  ThermalState thermal;
  QuadratureSpec quadrature;
  ClassicalConfig classical;
  OutputFormat format = OutputFormat::Csv;
  std::string out = "-";  // "-" is stdout
  std::uint64_t seed = 0;
};

// Model with the drives a bare `{"kind": ...}` config starts from.
ModelSpec model_preset(ModelKind k);

// Throws SchemaError naming the JSON path of the offending key.
RunConfig parse_config(const std::string& text);
std::string serialize_config(const RunConfig& cfg);
void validate(const RunConfig& cfg);

inline const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"transport", "geometry", "noise", "classical", "models-list", "selfcheck"};
  return names;
}

// Runs one command and writes its table to `out`. Returns the process exit status.
int run_command(const std::string& cmd, const RunConfig& cfg, std::ostream& out, std::ostream& err);

}  // namespace qpump
