#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "qpump/config.hpp"
#include "qpump/errors.hpp"

int main(int argc, char** argv) {
  using namespace qpump;
  CLI::App app{"Adiabatic quantum pump transport, geometry, noise and classical checks"};
  std::string command;
  std::string config_path, out_path, format;
  std::optional<int> grid;
  std::optional<double> temperature, mu;
  std::optional<std::uint64_t> seed;
  bool zero_t = false;

  app.add_option("command", command, "transport | geometry | noise | classical | models-list | selfcheck")
      ->required()
      ->check(CLI::IsMember(command_names()));
  app.add_option("--config", config_path, "JSON run configuration");
  app.add_option("--out", out_path, "output file (default: stdout)");
  app.add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  app.add_option("--grid", grid, "time grid size");
  app.add_option("--temperature", temperature, "temperature");
  app.add_option("--mu", mu, "Fermi energy");
  app.add_option("--seed", seed, "seed for randomized checks");
  app.add_flag("--zero-t", zero_t, "force T = 0");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : exit_code(ErrorKind::SchemaError);
  }

  RunConfig cfg;
  try {
    std::string text = "{}";
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw PumpError(ErrorKind::SchemaError, "cannot read config file " + config_path);
      std::ostringstream ss;
      ss << in.rdbuf();
      text = ss.str();
    }
    cfg = parse_config(text);
  } catch (const PumpError& e) {
    std::cerr << e.what() << "\n";
    return exit_code(e.kind());
  }
  if (!format.empty()) cfg.format = format == "json" ? OutputFormat::Json : OutputFormat::Csv;
  if (!out_path.empty()) cfg.out = out_path;
  if (grid) cfg.quadrature.time_grid = *grid;
  if (temperature) cfg.thermal.temperature = *temperature;
  if (mu) cfg.thermal.mu = cfg.model.mu = *mu;
  if (seed) cfg.seed = *seed;
  if (zero_t) cfg.thermal.temperature = 0.0;

  std::ostringstream buffer;
  const int rc = run_command(command, cfg, buffer, std::cerr);
  if (rc != 0 && buffer.str().empty()) return rc;
  if (cfg.out == "-") {
    std::cout << buffer.str();
  } else {
    std::ofstream f(cfg.out);
    if (!f) {
      std::cerr << "cannot write " << cfg.out << "\n";
      return exit_code(ErrorKind::SchemaError);
    }
    f << buffer.str();
  }
  return rc;
}
