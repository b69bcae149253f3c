#include "qpump/config.hpp"

#include <cmath>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <variant>

#include <fmt/core.h>
#include <json.hpp>

#include "qpump/classical.hpp"
#include "qpump/counting.hpp"
#include "qpump/errors.hpp"
#include "qpump/geometry.hpp"

namespace qpump {

using json = nlohmann::ordered_json;

ModelSpec model_preset(ModelKind k) {
  ModelSpec m;
  m.kind = k;
  switch (k) {
    case ModelKind::UTurn:
      m.flux.rate = 2 * M_PI;  // one flux quantum per period
      break;
    case ModelKind::Snowplow:
      m.theta.offset = 0.6;
      m.theta.amplitude = 0.3;
      m.xi.amplitude = 0.2;
      m.xi.phase = M_PI / 2;
      break;
    case ModelKind::Battery:
      m.theta.offset = 0.6;
      m.phi.rate = 2 * M_PI;
      break;
    case ModelKind::Sink:
      m.theta.offset = 0.6;
      m.gamma.rate = 2 * M_PI;
      break;
    case ModelKind::Optimal:
      m.theta.offset = 0.6;
      m.xi.rate = M_PI / std::sqrt(2.0);  // 2k_Fξ advances by 2π at μ = 1
      break;
    case ModelKind::Bicycle:
      break;
    case ModelKind::CustomTwoChannel:
      m.theta.offset = 0.6;
      m.theta.amplitude = 0.3;
      m.alpha.amplitude = 1.0;
      m.phi.amplitude = 1.0;
      m.phi.phase = M_PI / 2;
      break;
  }
  return m;
}

namespace {

[[noreturn]] void schema(const std::string& path, const std::string& msg) {
  throw PumpError(ErrorKind::SchemaError, fmt::format("at {}: {}", path, msg));
}

std::string child(const std::string& path, const std::string& key) { return path + "." + key; }

void require_object(const json& j, const std::string& path) {
  if (!j.is_object()) schema(path, "expected an object");
}

void check_keys(const json& j, const std::string& path, const std::set<std::string>& allowed) {
  require_object(j, path);
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key())) schema(child(path, it.key()), "unknown key");
}

void read(const json& j, const std::string& path, const char* key, double& out) {
  if (!j.contains(key)) return;
  const json& v = j.at(key);
  if (!v.is_number()) schema(child(path, key), "expected a number");
  out = v.get<double>();
  if (!std::isfinite(out)) schema(child(path, key), "expected a finite number");
}

void read(const json& j, const std::string& path, const char* key, int& out) {
  if (!j.contains(key)) return;
  const json& v = j.at(key);
  if (!v.is_number_integer()) schema(child(path, key), "expected an integer");
  out = v.get<int>();
}

void read(const json& j, const std::string& path, const char* key, bool& out) {
  if (!j.contains(key)) return;
  const json& v = j.at(key);
  if (!v.is_boolean()) schema(child(path, key), "expected true or false");
  out = v.get<bool>();
}

void read(const json& j, const std::string& path, const char* key, std::string& out) {
  if (!j.contains(key)) return;
  const json& v = j.at(key);
  if (!v.is_string()) schema(child(path, key), "expected a string");
  out = v.get<std::string>();
}

void positive(double v, const std::string& path) {
  if (!(v > 0)) schema(path, "must be positive");
}

void at_least(int v, int lo, const std::string& path) {
  if (v < lo) schema(path, fmt::format("must be at least {}", lo));
}

const char* kDriveNames[] = {"theta", "alpha", "phi", "gamma", "xi", "flux"};

Drive& drive_ref(ModelSpec& m, int i) {
  Drive* d[] = {&m.theta, &m.alpha, &m.phi, &m.gamma, &m.xi, &m.flux};
  return *d[i];
}

const Drive& drive_ref(const ModelSpec& m, int i) { return drive_ref(const_cast<ModelSpec&>(m), i); }

void read_drive(const json& j, const std::string& path, Drive& d) {
  check_keys(j, path, {"offset", "rate", "amplitude", "phase", "bump"});
  read(j, path, "offset", d.offset);
  read(j, path, "rate", d.rate);
  read(j, path, "amplitude", d.amplitude);
  read(j, path, "phase", d.phase);
  read(j, path, "bump", d.bump);
}

ModelSpec read_model(const json& j, const std::string& path) {
  std::set<std::string> keys{"kind",   "label", "period",        "pulse",  "t_a",    "t_b",         "mu",
                             "ell",    "optical_phase", "n",     "length", "height", "valve_width", "plateau"};
  for (const char* d : kDriveNames) keys.insert(d);
  check_keys(j, path, keys);
  std::string kind = "uturn";
  read(j, path, "kind", kind);
  ModelSpec m;
  try {
    m = model_preset(parse_model_kind(kind));
  } catch (const PumpError&) {
    schema(child(path, "kind"), fmt::format("unknown model kind '{}'", kind));
  }
  read(j, path, "label", m.label);
  read(j, path, "period", m.period);
  read(j, path, "pulse", m.pulse);
  read(j, path, "t_a", m.t_a);
  read(j, path, "t_b", m.t_b);
  read(j, path, "mu", m.mu);
  read(j, path, "ell", m.ell);
  read(j, path, "optical_phase", m.optical_phase);
  read(j, path, "n", m.n);
  read(j, path, "length", m.length);
  read(j, path, "height", m.height);
  read(j, path, "valve_width", m.valve_width);
  read(j, path, "plateau", m.plateau);
  for (int i = 0; i < 6; ++i)
    if (j.contains(kDriveNames[i])) {
      // A drive given in the config replaces the preset drive as a whole.
      Drive d;
      read_drive(j.at(kDriveNames[i]), child(path, kDriveNames[i]), d);
      drive_ref(m, i) = d;
    }
  positive(m.period, child(path, "period"));
  positive(m.mu, child(path, "mu"));
  positive(m.ell, child(path, "ell"));
  at_least(m.n, 1, child(path, "n"));
  positive(m.length, child(path, "length"));
  positive(m.height, child(path, "height"));
  positive(m.valve_width, child(path, "valve_width"));
  if (m.pulse && !(m.t_a < m.t_b)) schema(child(path, "t_b"), "pulse window needs t_a < t_b");
  try {
    validate(m);
  } catch (const PumpError& e) {
    schema(path, e.what());
  }
  return m;
}

QuadratureSpec read_quadrature(const json& j, const std::string& path) {
  check_keys(j, path,
             {"h_E_rel", "h_t_rel", "richardson", "time_grid", "energy_window", "energy_nodes", "energy_panels",
              "unitarity_tol", "hermiticity_tol", "omega_identity_tol", "omega_step_rel", "stokes_tol", "numeric_tol",
              "eps_diag_rel", "shot_grid"});
  QuadratureSpec q;
  read(j, path, "h_E_rel", q.h_E_rel);
  read(j, path, "h_t_rel", q.h_t_rel);
  read(j, path, "richardson", q.richardson);
  read(j, path, "time_grid", q.time_grid);
  read(j, path, "energy_window", q.energy_window);
  read(j, path, "energy_nodes", q.energy_nodes);
  read(j, path, "energy_panels", q.energy_panels);
  read(j, path, "unitarity_tol", q.unitarity_tol);
  read(j, path, "hermiticity_tol", q.hermiticity_tol);
  read(j, path, "omega_identity_tol", q.omega_identity_tol);
  read(j, path, "omega_step_rel", q.omega_step_rel);
  read(j, path, "stokes_tol", q.stokes_tol);
  read(j, path, "numeric_tol", q.numeric_tol);
  read(j, path, "eps_diag_rel", q.eps_diag_rel);
  read(j, path, "shot_grid", q.shot_grid);
  return q;
}

void validate_quadrature(const QuadratureSpec& q, const std::string& path) {
  for (auto [v, k] : {std::pair{q.h_E_rel, "h_E_rel"}, {q.h_t_rel, "h_t_rel"}, {q.energy_window, "energy_window"},
                      {q.unitarity_tol, "unitarity_tol"}, {q.hermiticity_tol, "hermiticity_tol"},
                      {q.omega_identity_tol, "omega_identity_tol"}, {q.omega_step_rel, "omega_step_rel"},
                      {q.stokes_tol, "stokes_tol"}, {q.numeric_tol, "numeric_tol"}, {q.eps_diag_rel, "eps_diag_rel"}})
    positive(v, child(path, k));
  at_least(q.time_grid, 16, child(path, "time_grid"));
  at_least(q.energy_nodes, 16, child(path, "energy_nodes"));
  at_least(q.shot_grid, 16, child(path, "shot_grid"));
  at_least(q.energy_panels, 1, child(path, "energy_panels"));
}

ClassicalConfig read_classical(const json& j, const std::string& path) {
  check_keys(j, path, {"V", "v0", "Tw", "t0", "t1", "temperature", "partition_grid", "delta_phi", "t_on"});
  ClassicalConfig c;
  read(j, path, "V", c.plow.V);
  read(j, path, "v0", c.plow.v0);
  read(j, path, "Tw", c.plow.Tw);
  read(j, path, "t0", c.t0);
  read(j, path, "t1", c.t1);
  read(j, path, "temperature", c.temperature);
  read(j, path, "partition_grid", c.partition_grid);
  read(j, path, "delta_phi", c.delta_phi);
  read(j, path, "t_on", c.t_on);
  positive(c.plow.V, child(path, "V"));
  positive(c.plow.Tw, child(path, "Tw"));
  if (!(c.plow.V > 0.5 * c.plow.v0 * c.plow.v0)) schema(child(path, "v0"), "barrier height must exceed v0^2/2");
  if (!(c.t1 > c.t0)) schema(child(path, "t1"), "label window needs t0 < t1");
  positive(c.temperature, child(path, "temperature"));
  at_least(c.partition_grid, 2, child(path, "partition_grid"));
  return c;
}

json drive_json(const Drive& d) {
  return json{{"offset", d.offset}, {"rate", d.rate}, {"amplitude", d.amplitude}, {"phase", d.phase}, {"bump", d.bump}};
}

}  // namespace

void validate(const RunConfig& cfg) {
  validate(cfg.model);
  validate_quadrature(cfg.quadrature, "$.quadrature");
  if (!(cfg.thermal.mu > 0)) schema("$.thermal.mu", "must be positive");
  if (!(cfg.thermal.temperature >= 0)) schema("$.thermal.temperature", "must be non-negative");
}

RunConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    schema("$", fmt::format("malformed JSON ({})", e.what()));
  }
  check_keys(j, "$", {"model", "thermal", "quadrature", "classical", "output", "seed"});
  RunConfig cfg;
  cfg.model = j.contains("model") ? read_model(j.at("model"), "$.model") : model_preset(ModelKind::UTurn);
  cfg.thermal.mu = cfg.model.mu;
  if (j.contains("thermal")) {
    const json& t = j.at("thermal");
    check_keys(t, "$.thermal", {"mu", "temperature"});
    read(t, "$.thermal", "mu", cfg.thermal.mu);
    read(t, "$.thermal", "temperature", cfg.thermal.temperature);
    // One Fermi energy: a thermal μ without a model μ sets both.
    if (t.contains("mu") && !(j.contains("model") && j.at("model").contains("mu"))) cfg.model.mu = cfg.thermal.mu;
    if (t.contains("mu") && cfg.thermal.mu != cfg.model.mu) schema("$.thermal.mu", "differs from $.model.mu");
  }
  if (j.contains("quadrature")) cfg.quadrature = read_quadrature(j.at("quadrature"), "$.quadrature");
  if (j.contains("classical")) cfg.classical = read_classical(j.at("classical"), "$.classical");
  if (j.contains("output")) {
    const json& o = j.at("output");
    check_keys(o, "$.output", {"format", "path"});
    std::string fmt_name = "csv";
    read(o, "$.output", "format", fmt_name);
    if (fmt_name == "csv")
      cfg.format = OutputFormat::Csv;
    else if (fmt_name == "json")
      cfg.format = OutputFormat::Json;
    else
      schema("$.output.format", "expected \"csv\" or \"json\"");
    read(o, "$.output", "path", cfg.out);
  }
  if (j.contains("seed")) {
    const json& s = j.at("seed");
    if (!s.is_number_unsigned()) schema("$.seed", "expected a non-negative integer");
    cfg.seed = s.get<std::uint64_t>();
  }
  try {
    validate(cfg);
  } catch (const PumpError& e) {
    if (e.kind() == ErrorKind::SchemaError) throw;
    schema("$", e.what());
  }
  return cfg;
}

std::string serialize_config(const RunConfig& cfg) {
  const ModelSpec& m = cfg.model;
  json model{{"kind", to_string(m.kind)}, {"label", m.label}, {"period", m.period}, {"pulse", m.pulse},
             {"t_a", m.t_a},              {"t_b", m.t_b},     {"mu", m.mu}};
  for (int i = 0; i < 6; ++i) model[kDriveNames[i]] = drive_json(drive_ref(m, i));
  model["ell"] = m.ell;
  model["optical_phase"] = m.optical_phase;
  model["n"] = m.n;
  model["length"] = m.length;
  model["height"] = m.height;
  model["valve_width"] = m.valve_width;
  model["plateau"] = m.plateau;
  const QuadratureSpec& q = cfg.quadrature;
  const ClassicalConfig& c = cfg.classical;
  json j{{"model", model},
         {"thermal", {{"mu", cfg.thermal.mu}, {"temperature", cfg.thermal.temperature}}},
         {"quadrature",
          {{"h_E_rel", q.h_E_rel},
           {"h_t_rel", q.h_t_rel},
           {"richardson", q.richardson},
           {"time_grid", q.time_grid},
           {"energy_window", q.energy_window},
           {"energy_nodes", q.energy_nodes},
           {"energy_panels", q.energy_panels},
           {"unitarity_tol", q.unitarity_tol},
           {"hermiticity_tol", q.hermiticity_tol},
           {"omega_identity_tol", q.omega_identity_tol},
           {"omega_step_rel", q.omega_step_rel},
           {"stokes_tol", q.stokes_tol},
           {"numeric_tol", q.numeric_tol},
           {"eps_diag_rel", q.eps_diag_rel},
           {"shot_grid", q.shot_grid}}},
         {"classical",
          {{"V", c.plow.V},
           {"v0", c.plow.v0},
           {"Tw", c.plow.Tw},
           {"t0", c.t0},
           {"t1", c.t1},
           {"temperature", c.temperature},
           {"partition_grid", c.partition_grid},
           {"delta_phi", c.delta_phi},
           {"t_on", c.t_on}}},
         {"output", {{"format", cfg.format == OutputFormat::Csv ? "csv" : "json"}, {"path", cfg.out}}},
         {"seed", cfg.seed}};
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------------------------
// Output tables

namespace {

struct Row {
  std::string quantity;
  int channel = 0;  // 1-based; 0 when not channel-resolved
  std::optional<double> E, t;
  std::variant<double, std::string> value;
  std::string unit;
};

struct Table {
  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<Row> rows;

  void add(std::string q, int ch, std::optional<double> E, std::optional<double> t, double v, std::string unit) {
    rows.push_back({std::move(q), ch, E, t, v, std::move(unit)});
  }
  void note(std::string k, std::string v) { meta.emplace_back(std::move(k), std::move(v)); }
};

std::string num(double x) { return fmt::format("{}", x); }  // shortest round-trip form

void base_metadata(Table& tb, const std::string& cmd, const RunConfig& cfg) {
  const QuadratureSpec& q = cfg.quadrature;
  tb.note("command", cmd);
  tb.note("model", to_string(cfg.model.kind));
  tb.note("label", cfg.model.label.empty() ? to_string(cfg.model.kind) : cfg.model.label);
  tb.note("mu", num(cfg.thermal.mu));
  tb.note("temperature", num(cfg.thermal.temperature));
  tb.note("seed", std::to_string(cfg.seed));
  tb.note("h_E_rel", num(q.h_E_rel));
  tb.note("h_t_rel", num(q.h_t_rel));
  tb.note("richardson", q.richardson ? "true" : "false");
  tb.note("time_grid", std::to_string(q.time_grid));
  tb.note("energy_window", num(q.energy_window));
  tb.note("energy_nodes", std::to_string(q.energy_nodes));
  tb.note("energy_panels", std::to_string(q.energy_panels));
  tb.note("unitarity_tol", num(q.unitarity_tol));
  tb.note("hermiticity_tol", num(q.hermiticity_tol));
  tb.note("omega_identity_tol", num(q.omega_identity_tol));
  tb.note("omega_step_rel", num(q.omega_step_rel));
  tb.note("stokes_tol", num(q.stokes_tol));
  tb.note("numeric_tol", num(q.numeric_tol));
  tb.note("eps_diag_rel", num(q.eps_diag_rel));
  tb.note("shot_grid", std::to_string(q.shot_grid));
}

void write_csv(const Table& tb, std::ostream& os) {
  for (const auto& [k, v] : tb.meta) os << "# " << k << "=" << v << "\n";
  os << "quantity,channel,E,t,value,unit\n";
  for (const Row& r : tb.rows) {
    os << r.quantity << ',' << (r.channel ? std::to_string(r.channel) : "") << ',' << (r.E ? num(*r.E) : "") << ','
       << (r.t ? num(*r.t) : "") << ',';
    if (const double* d = std::get_if<double>(&r.value))
      os << num(*d);
    else
      os << std::get<std::string>(r.value);
    os << ',' << r.unit << '\n';
  }
}

void write_json(const Table& tb, std::ostream& os) {
  json meta = json::object();
  for (const auto& [k, v] : tb.meta) meta[k] = v;
  json rows = json::array();
  for (const Row& r : tb.rows) {
    json o{{"quantity", r.quantity}};
    o["channel"] = r.channel ? json(r.channel) : json(nullptr);
    o["E"] = r.E ? json(*r.E) : json(nullptr);
    o["t"] = r.t ? json(*r.t) : json(nullptr);
    if (const double* d = std::get_if<double>(&r.value))
      o["value"] = *d;
    else
      o["value"] = std::get<std::string>(r.value);
    o["unit"] = r.unit;
    rows.push_back(std::move(o));
  }
  os << json{{"metadata", meta}, {"rows", rows}}.dump(2) << "\n";
}

// ---------------------------------------------------------------------------------------------
// Commands

void cmd_transport(const RunConfig& cfg, Table& tb) {
  const PumpCycle c = make_pump(cfg.model);
  const TransportReport r = transport_report(c, cfg.thermal, cfg.quadrature);
  for (int j = 0; j < c.n_channels; ++j)
    for (std::size_t i = 0; i < r.times.size(); ++i) {
      tb.add("current", j + 1, std::nullopt, r.times[i], r.current[j][i], "charge/time");
      tb.add("dissipation", j + 1, std::nullopt, r.times[i], r.dissipation[j][i], "energy/time");
      if (r.finite_temperature) {
        tb.add("entropy_current", j + 1, std::nullopt, r.times[i], r.entropy_current[j][i], "1/time");
        tb.add("noise_current", j + 1, std::nullopt, r.times[i], r.noise_current[j][i], "charge^2/time");
      }
    }
  for (int j = 0; j < c.n_channels; ++j) tb.add("cycle_charge", j + 1, std::nullopt, std::nullopt, r.cycle_charge[j], "charge");
  tb.add("birman_krein_residual", 0, std::nullopt, std::nullopt, r.birman_krein_residual, "charge/time");
  tb.add("dissipation_bound_violation", 0, std::nullopt, std::nullopt, r.bound_violation, "energy/time");
  tb.note("time_nodes", std::to_string(r.times.size()));
}

// Family that shrinks every drive to its offset as v → 0; spans the cycle for the surface integral.
SurfacePatch drive_scaling_patch(const ModelSpec& m, double mu) {
  SurfacePatch p;
  const double t0 = m.pulse ? m.t_a : 0.0, span = m.pulse ? m.t_b - m.t_a : m.period;
  p.smatrix = [m, mu, t0, span](double u, double v) {
    ModelSpec s = m;
    for (int i = 0; i < 6; ++i) {
      Drive& d = drive_ref(s, i);
      d.rate *= v;
      d.amplitude *= v;
      d.bump *= v;
    }
    return make_pump(s)(mu, t0 + u * span);
  };
  // The v = 1 edge runs backwards in time on a counterclockwise boundary.
  p.reversed = true;
  return p;
}

void cmd_geometry(const RunConfig& cfg, Table& tb) {
  const PumpCycle c = make_pump(cfg.model);
  const double mu = cfg.thermal.mu;
  const int n = cfg.quadrature.time_grid;
  for (int j = 0; j < c.n_channels; ++j) {
    const RowPath path = row_path(c, j, mu, n);
    tb.add("global_angle", j + 1, mu, std::nullopt, global_angle(path), "rad");
    tb.add("line_charge", j + 1, mu, std::nullopt, line_charge(c, j, mu, n), "charge");
    if (c.n_channels == 2 && path.closed)
      tb.add("fractional_charge", j + 1, mu, std::nullopt, fractional_charge(path), "charge");
    std::vector<cplx> diag;
    bool nodal = false;
    for (const Vec& s : path.samples) {
      if (std::abs(s(j)) < 0.05) nodal = true;
      diag.push_back(s(j) / std::abs(s(j)));
    }
    if (!nodal) tb.add("diagonal_winding", j + 1, mu, std::nullopt, winding_number(diag, path.closed).winding, "1");
  }
  std::vector<cplx> det;
  for (int k = 0; k < n; ++k) {
    const cplx d = c(mu, c.t_begin() + (c.t_end() - c.t_begin()) * k / n).determinant();
    det.push_back(d / std::abs(d));
  }
  if (c.pulse) det.push_back(c(mu, c.t_end()).determinant());
  tb.add("det_winding", 0, mu, std::nullopt, winding_number(det, !c.pulse).winding, "1");

  if (cfg.model.kind != ModelKind::Bicycle) {
    const SurfacePatch patch = drive_scaling_patch(cfg.model, mu);
    for (int j = 0; j < c.n_channels; ++j) {
      const StokesResult s = charge_via_stokes(patch, j, cfg.quadrature.stokes_tol);
      tb.add("stokes_charge", j + 1, mu, std::nullopt, s.charge, "charge");
      tb.add("patch_boundary_charge", j + 1, mu, std::nullopt, patch_boundary_charge(patch, j, n), "charge");
      tb.add("stokes_panels", j + 1, mu, std::nullopt, s.panels, "1");
    }
  }
  // The cylinder form needs ℰ_jj(0, t) = 0.
  double threshold = 0;
  for (int k = 0; k < 64; ++k) {
    const double t = c.t_begin() + (c.t_end() - c.t_begin()) * (k + 0.5) / 64;
    const Mat e = energy_shift(c, 1e-8 * mu, t, cfg.quadrature);
    for (int j = 0; j < c.n_channels; ++j) threshold = std::max(threshold, std::abs(e(j, j).real()));
  }
  if (threshold < 1e-6 && cfg.model.kind != ModelKind::Bicycle) {
    for (int j = 0; j < c.n_channels; ++j)
      tb.add("cylinder_charge", j + 1, mu, std::nullopt, cylinder_charge(c, j, mu, cfg.quadrature), "charge");
    tb.note("cylinder", "evaluated");
  } else {
    tb.note("cylinder", "skipped: threshold energy shift does not vanish or model too sharp");
  }
}

void cmd_noise(const RunConfig& cfg, Table& tb) {
  const PumpCycle c = make_pump(cfg.model);
  for (int j = 0; j < c.n_channels; ++j) {
    const NoiseReport r = noise_report(c, j, cfg.thermal, cfg.quadrature);
    if (r.method == "finiteT") tb.add("jn_noise", j + 1, std::nullopt, std::nullopt, r.jn_noise, "charge^2");
    tb.add("shot_noise", j + 1, std::nullopt, std::nullopt, r.shot_noise, "charge^2");
    if (j == 0) {
      tb.note("method", r.method);
      if (r.method == "zeroT") {
        tb.note("shot_grid_used", std::to_string(r.grid));
        tb.note("eps_diag", num(r.eps_diag));
        tb.note("diagonal_substitutions", std::to_string(r.diagonal_substitutions));
        tb.note("large_mu_assumption", "true");
      }
    }
  }
}

void cmd_classical(const RunConfig& cfg, Table& tb) {
  const ClassicalConfig& cc = cfg.classical;
  const PlowSpec& p = cc.plow;
  tb.note("V", num(p.V));
  tb.note("v0", num(p.v0));
  tb.note("Tw", num(p.Tw));
  tb.note("classical_temperature", num(cc.temperature));
  tb.note("label_window", fmt::format("[{}, {}]", num(cc.t0), num(cc.t1)));

  // Partition table: analytic region next to the simulated outcome.
  const int g = cc.partition_grid;
  int disagreements = 0;
  for (int dir : {1, -1})
    for (int a = 0; a < g; ++a)
      for (int b = 0; b < g; ++b) {
        const double E = 3 * p.V * (a + 0.5) / g;
        const double t = -2 * p.Tw + 4 * p.Tw * (b + 0.5) / g;
        const Partition part = snowplow_partition(p, E, t, dir);
        const ScatterResult r = classical_scatter(p, {E, t, part.in_channel});
        tb.add("partition_out_channel", part.in_channel, E, t, part.out_channel, "channel");
        tb.add("simulated_out_channel", part.in_channel, E, t, r.out.channel, "channel");
        if (r.out.channel != part.out_channel && !near_critical_curve(p, E, t, dir, 1e-6)) ++disagreements;
      }
  tb.add("partition_disagreements", 0, std::nullopt, std::nullopt, disagreements, "1");

  // Trajectories at the Fermi energy through the middle of the motion.
  for (int ch : {1, 2}) {
    const ScatterResult r = classical_scatter(p, {cfg.thermal.mu, 0.0, ch}, true);
    for (const CollisionEvent& e : r.history) {
      tb.add("trajectory_x", ch, cfg.thermal.mu, e.s, e.x, "length");
      tb.add("trajectory_v_after", ch, cfg.thermal.mu, e.s, e.v_after, "length/time");
    }
    tb.add("energy_shift", ch, cfg.thermal.mu, 0.0, r.energy_shift, "energy");
    tb.add("time_delay", ch, cfg.thermal.mu, 0.0, r.time_delay, "time");
  }

  const ClassicalCharge q = classical_bpt_charge(p, ThermalState{cfg.thermal.mu, cc.temperature}, cc.t0, cc.t1);
  for (int j = 0; j < 2; ++j) {
    tb.add("charge_direct", j + 1, std::nullopt, std::nullopt, q.direct[j], "charge");
    tb.add("charge_bpt", j + 1, std::nullopt, std::nullopt, q.bpt[j], "charge");
    tb.add("charge_difference", j + 1, std::nullopt, std::nullopt, q.difference[j], "charge");
  }
  const BatteryReport b = classical_battery_demo(cc.delta_phi, cc.t_on);
  tb.add("battery_energy_shift", 1, b.energy_in, std::nullopt, b.energy_shift, "energy");
  tb.add("battery_static_energy_change", 1, b.energy_in, std::nullopt, b.static_energy_change, "energy");
  tb.add("battery_static_time_change", 1, b.energy_in, std::nullopt, b.static_time_change, "time");
}

void cmd_models(Table& tb) {
  for (const std::string& m : model_kinds()) tb.rows.push_back({"model", 0, std::nullopt, std::nullopt, m, ""});
}

// Invariant suite; returns the number of failed checks.
int cmd_selfcheck(const RunConfig& cfg, Table& tb) {
  const QuadratureSpec& q = cfg.quadrature;
  int failed = 0;
  auto check = [&](const std::string& name, double value, bool ok) {
    tb.add("selfcheck." + name, 0, std::nullopt, std::nullopt, value, "");
    tb.add("selfcheck." + name + ".pass", 0, std::nullopt, std::nullopt, ok ? 1.0 : 0.0, "1");
    if (!ok) ++failed;
  };
  const ThermalState zero{1.0, 0.0};

  {
    const PumpCycle u = make_pump(model_preset(ModelKind::UTurn));
    const double q0 = cycle_charge(u, 0, zero, q).charge, q1 = cycle_charge(u, 1, zero, q).charge;
    check("uturn_quantization", std::max(std::abs(q0 + 1), std::abs(q1 - 1)),
          std::abs(q0 + 1) < 1e-6 && std::abs(q1 - 1) < 1e-6);
  }
  double bk = 0, omega = 0, bound = 0, unit = 0;
  for (int n : {2, 3, 4})
    for (std::uint64_t k = 0; k < 3; ++k) {
      const PumpCycle c = random_analytic_cycle(n, cfg.seed * 101 + k + 17 * n);
      bk = std::max(bk, birman_krein_residual(c, zero, q));
      for (double t : {0.1, 0.45, 0.8}) {
        const OmegaIdentity o = omega_identity(c, 1.0, t, q);
        omega = std::max(omega, o.residual);
        unit = std::max(unit, unitarity_residual(c(1.0, t)));
        const Mat e = energy_shift(c, 1.0, t, q);
        for (int j = 0; j < n; ++j) {
          const double cur = e(j, j).real() / (2 * M_PI);
          bound = std::max(bound, M_PI * cur * cur - (e * e)(j, j).real() / (4 * M_PI));
        }
      }
    }
  check("birman_krein_residual", bk, bk < 1e-8);
  check("omega_identity_residual", omega, omega < q.omega_identity_tol);
  check("unitarity_residual", unit, unit < q.unitarity_tol);
  check("dissipation_bound_violation", bound, bound < 1e-10);
  check("h_integral_entropy", std::abs(h_integral(FlowKind::Entropy) - 0.5),
        std::abs(h_integral(FlowKind::Entropy) - 0.5) < 1e-10);
  check("h_integral_noise", std::abs(h_integral(FlowKind::Noise) - 1.0 / 6),
        std::abs(h_integral(FlowKind::Noise) - 1.0 / 6) < 1e-10);

  {
    const PumpCycle c = random_pulse_cycle(2, cfg.seed + 5);
    const ThermalState th{1.0, 1e-4};
    const double jn = jn_noise(c, 0, th, q), sh = shot_noise_finite_T(c, 0, th, q);
    const double direct = second_cumulant_direct(c, 0, th, q);
    const double rel = std::abs(jn + sh - direct) / std::abs(direct);
    check("second_cumulant_relative", rel, rel < 1e-6);
  }
  {
    const PlowSpec p = cfg.classical.plow;
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> uE(0.05, 3 * p.V), ut(-3 * p.Tw, 3 * p.Tw);
    int bad = 0;
    for (int i = 0; i < 2000; ++i) {
      const double E = uE(rng), t = ut(rng);
      const int dir = i % 2 ? 1 : -1;
      if (near_critical_curve(p, E, t, dir, 1e-6)) continue;
      const Partition part = snowplow_partition(p, E, t, dir);
      if (classical_scatter(p, {E, t, part.in_channel}).out.channel != part.out_channel) ++bad;
    }
    check("classical_partition_disagreements", bad, bad == 0);
  }
  tb.note("failed_checks", std::to_string(failed));
  return failed;
}

}  // namespace

int run_command(const std::string& cmd, const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  Table tb;
  base_metadata(tb, cmd, cfg);
  int status = 0;
  try {
    validate(cfg);
    if (cmd == "transport")
      cmd_transport(cfg, tb);
    else if (cmd == "geometry")
      cmd_geometry(cfg, tb);
    else if (cmd == "noise")
      cmd_noise(cfg, tb);
    else if (cmd == "classical")
      cmd_classical(cfg, tb);
    else if (cmd == "models-list")
      cmd_models(tb);
    else if (cmd == "selfcheck") {
      if (cmd_selfcheck(cfg, tb) > 0) {
        err << "selfcheck: numeric invariant violated (see rows with pass = 0)\n";
        status = exit_code(ErrorKind::InvariantViolation);
      }
    } else {
      err << fmt::format("SchemaError: unknown command '{}'\n", cmd);
      return exit_code(ErrorKind::SchemaError);
    }
  } catch (const PumpError& e) {
    err << e.what() << "\n";
    return exit_code(e.kind());
  }
  if (cfg.format == OutputFormat::Csv)
    write_csv(tb, out);
  else
    write_json(tb, out);
  return status;
}

}  // namespace qpump
