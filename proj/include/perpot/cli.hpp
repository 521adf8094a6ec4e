// Copyright 2026 The perpot Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "perpot/experiments.hpp"

namespace perpot::cli {

using json = nlohmann::ordered_json;

inline const std::vector<std::string>& commands() {
  static const std::vector<std::string> c{"eval-green", "jump-check", "solve", "asymptotics",
                                          "shape-sweep"};
  return c;
}

struct ProbeSpec {
  double t = 0.0;
  std::vector<double> x;
};

/// Fully resolved run configuration (defaults applied).
struct RunConfig {
  std::string command;
  std::vector<double> cell;
  // kernel
  std::string family = "laplace";
  double k_re = 1.0, k_im = 0.0;
  std::vector<double> eta;
  double omega = 1.5;
  double crossover = 0.0;
  double resonance_tol = -1.0;
  // ewald
  double split_scale = 1.0;
  double real_radius = 0.0, spectral_radius = 0.0;  // 0: automatic
  double ewald_tolerance = 1e-12;
  // geometry
  std::string shape;
  std::vector<double> shape_params;
  int N = 128;
  int L = 12;
  // boundary data
  std::string data = "constant";
  std::vector<double> source, sink;
  double data_value = 1.0;
  double data_amplitude = 0.5;
  std::string data_file;
  // eval-green
  std::vector<std::vector<double>> points;
  std::vector<double> times;
  // jump-check
  std::vector<std::string> families;
  std::vector<double> distances;
  int fine_nodes = 1 << 15;
  // time discretisation
  double T = 1.0;
  int M = 64;
  // asymptotics
  std::vector<double> epsilons;
  int fit_degree = 2;
  std::vector<double> center;
  std::vector<double> probe;
  // shape sweep
  int basis = 0;
  double step = 0.04;
  std::vector<double> s_grid;
  std::vector<ProbeSpec> probes;
  // acceptance thresholds
  std::map<std::string, double> checks;
  // output
  std::string csv;
  std::string summary = "summary.json";
  std::string export_path;
  unsigned workers = 1;

  std::vector<std::string> warnings;
  json resolved;
};

struct ParseResult {
  RunConfig config;
  std::vector<std::string> errors;
  bool ok() const { return errors.empty(); }
};

// --------------------------------------------------------------- parsing

namespace detail {

inline std::map<std::string, double> default_checks(const std::string& command, const std::string& family) {
  if (command == "eval-green") return {{"max_rep_disagreement", 1e-9}};
  if (command == "jump-check") return {{"max_error_elliptic", 1e-5}, {"max_error_heat", 1e-3}};
  if (command == "solve") {
    const double e = family == "laplace" ? 1e-8 : family == "heat" ? 1e-3 : 1e-6;
    return {{"max_error", e}, {"max_periodicity", 1e-8}};
  }
  if (command == "asymptotics")
    return {{"max_relative_gap", 1e-3}, {"ratio_min", 1.5}, {"ratio_max", 2.5}};
  if (command == "shape-sweep")
    return {{"max_ratio_deviation", 0.1}, {"max_periodicity", 1e-8}, {"max_identity_spread", 1e-12}};
  return {};
}

class Reader {
 public:
  Reader(std::vector<std::string>& errors) : errors_(errors) {}

  void allowed(const json& obj, const std::string& where, const std::set<std::string>& keys) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
      if (!keys.count(it.key())) errors_.push_back("unknown key '" + where + it.key() + "'");
  }

  template <class T>
  T get(const json& obj, const std::string& key, const std::string& where, T def) {
    if (!obj.contains(key)) return def;
    try {
      return obj.at(key).get<T>();
    } catch (const std::exception&) {
      errors_.push_back("key '" + where + key + "' has the wrong type");
      return def;
    }
  }

  json section(const json& root, const std::string& key) {
    if (!root.contains(key)) return json::object();
    if (!root.at(key).is_object()) {
      errors_.push_back("key '" + key + "' must be an object");
      return json::object();
    }
    return root.at(key);
  }

  void error(const std::string& e) { errors_.push_back(e); }

 private:
  std::vector<std::string>& errors_;
};

inline bool known(const std::vector<std::string>& list, const std::string& v) {
  return std::find(list.begin(), list.end(), v) != list.end();
}

inline std::size_t shape_param_count(const std::string& shape) {
  if (shape == "circle") return 3;
  if (shape == "ellipse") return 4;
  if (shape == "kite") return 3;
  if (shape == "sphere") return 4;
  return 0;
}

inline std::string default_shape(int n) { return n == 3 ? "sphere" : "circle"; }

inline std::vector<double> default_shape_params(const std::vector<double>& cell, const std::string& shape) {
  if (cell.empty()) return {};
  const double m = *std::min_element(cell.begin(), cell.end());
  if (shape == "sphere" && cell.size() == 3) return {0.5 * cell[0], 0.5 * cell[1], 0.5 * cell[2], 0.25 * m};
  if (cell.size() != 2) return {};
  if (shape == "circle") return {0.5 * cell[0], 0.5 * cell[1], 0.2 * m};
  if (shape == "ellipse") return {0.5 * cell[0], 0.5 * cell[1], 0.25 * m, 0.18 * m};
  if (shape == "kite") return {0.5 * cell[0], 0.5 * cell[1], 0.15 * m};
  return {};
}

}  // namespace detail

/// Parses and validates a JSON configuration; every problem found is reported.
inline ParseResult parse_config(const std::string& text, const std::string& command_hint = "") {
  ParseResult out;
  auto& c = out.config;
  auto& errors = out.errors;
  json root;
  try {
    root = json::parse(text);
  } catch (const std::exception& e) {
    errors.push_back(std::string("malformed configuration: ") + e.what());
    return out;
  }
  if (!root.is_object()) {
    errors.push_back("configuration must be a JSON object");
    return out;
  }
  detail::Reader rd(errors);
  rd.allowed(root, "", {"command", "cell", "kernel", "ewald", "geometry", "data", "eval", "jump", "time",
                        "asymptotics", "sweep", "probes", "checks", "output", "workers"});

  c.command = rd.get<std::string>(root, "command", "", command_hint);
  if (!command_hint.empty() && c.command != command_hint)
    errors.push_back("config command '" + c.command + "' does not match subcommand '" + command_hint + "'");
  if (c.command.empty()) errors.push_back("missing required key 'command'");
  else if (!detail::known(commands(), c.command)) errors.push_back("unknown command '" + c.command + "'");

  if (!root.contains("cell")) errors.push_back("missing required key 'cell'");
  c.cell = rd.get<std::vector<double>>(root, "cell", "", {});
  int n = static_cast<int>(c.cell.size());
  bool cell_ok = false;
  if (root.contains("cell")) {
    try {
      make_cell(c.cell);
      cell_ok = true;
    } catch (const std::exception& e) {
      errors.push_back(std::string("cell: ") + e.what());
    }
  }

  const json kern = rd.section(root, "kernel");
  rd.allowed(kern, "kernel.", {"family", "k", "eta", "omega", "crossover", "resonance_tol"});
  c.family = rd.get<std::string>(kern, "family", "kernel.", c.command == "asymptotics" ? "helmholtz" : "laplace");
  if (!detail::known({"laplace", "helmholtz", "lame", "heat"}, c.family))
    errors.push_back("unknown kernel family '" + c.family + "'");
  if (kern.contains("k")) {
    const auto& kv = kern.at("k");
    if (kv.is_number()) {
      c.k_re = kv.get<double>();
    } else if (kv.is_array() && kv.size() == 2 && kv[0].is_number() && kv[1].is_number()) {
      c.k_re = kv[0].get<double>();
      c.k_im = kv[1].get<double>();
    } else {
      errors.push_back("key 'kernel.k' must be a number or [re, im]");
    }
  }
  c.eta = rd.get<std::vector<double>>(kern, "eta", "kernel.", std::vector<double>(std::max(n, 0), 0.0));
  if (cell_ok && static_cast<int>(c.eta.size()) != n) errors.push_back("kernel.eta must have one entry per dimension");
  c.omega = rd.get<double>(kern, "omega", "kernel.", 1.5);
  c.crossover = rd.get<double>(kern, "crossover", "kernel.", 0.0);
  c.resonance_tol = rd.get<double>(kern, "resonance_tol", "kernel.", -1.0);
  bool uses_lame = c.family == "lame" || kern.contains("omega");
  if (root.contains("jump") && root.at("jump").is_object() && root.at("jump").contains("families"))
    for (const auto& f : root.at("jump").at("families"))
      uses_lame = uses_lame || (f.is_string() && f.get<std::string>() == "lame");
  if (cell_ok && uses_lame && !(c.omega > 1.0 - 2.0 / n))
    errors.push_back("kernel.omega = " + std::to_string(c.omega) + " violates omega > 1 - 2/" +
                     std::to_string(n) + " = " + std::to_string(1.0 - 2.0 / n));

  const json ew = rd.section(root, "ewald");
  rd.allowed(ew, "ewald.", {"split_scale", "real_radius", "spectral_radius", "tolerance"});
  c.split_scale = rd.get<double>(ew, "split_scale", "ewald.", 1.0);
  c.real_radius = rd.get<double>(ew, "real_radius", "ewald.", 0.0);
  c.spectral_radius = rd.get<double>(ew, "spectral_radius", "ewald.", 0.0);
  c.ewald_tolerance = rd.get<double>(ew, "tolerance", "ewald.", 1e-12);
  if (!(c.split_scale > 0.0)) errors.push_back("ewald.split_scale must be positive");
  if (c.real_radius < 0.0 || c.spectral_radius < 0.0) errors.push_back("ewald radii must be positive (0 = automatic)");

  const json geo = rd.section(root, "geometry");
  rd.allowed(geo, "geometry.", {"shape", "params", "N", "L"});
  c.shape = rd.get<std::string>(geo, "shape", "geometry.", detail::default_shape(n));
  if (!detail::shape_param_count(c.shape)) errors.push_back("unknown shape '" + c.shape + "'");
  c.shape_params = rd.get<std::vector<double>>(geo, "params", "geometry.", detail::default_shape_params(c.cell, c.shape));
  if (detail::shape_param_count(c.shape) && c.shape_params.size() != detail::shape_param_count(c.shape))
    errors.push_back("geometry.params for '" + c.shape + "' needs " +
                     std::to_string(detail::shape_param_count(c.shape)) + " numbers");
  if (cell_ok && ((c.shape == "sphere") != (n == 3)) && c.command != "asymptotics")
    errors.push_back("shape '" + c.shape + "' does not match the cell dimension");
  c.N = rd.get<int>(geo, "N", "geometry.", 128);
  c.L = rd.get<int>(geo, "L", "geometry.", 12);
  if (c.N < 8 || c.N % 2) errors.push_back("geometry.N must be even and >= 8");
  if (c.L < 4) errors.push_back("geometry.L must be >= 4");

  const json dat = rd.section(root, "data");
  rd.allowed(dat, "data.", {"expr", "source", "sink", "value", "amplitude", "file"});
  const std::string def_data = c.command == "shape-sweep" ? "ramp-cosine" : c.command == "solve" ? "green" : "constant";
  c.data = rd.get<std::string>(dat, "expr", "data.", def_data);
  if (!detail::known({"zero", "constant", "green", "dipole", "ramp-cosine", "file"}, c.data))
    errors.push_back("unknown data expression '" + c.data + "'");
  c.source = rd.get<std::vector<double>>(dat, "source", "data.", {});
  c.sink = rd.get<std::vector<double>>(dat, "sink", "data.", {});
  c.data_value = rd.get<double>(dat, "value", "data.", 1.0);
  c.data_amplitude = rd.get<double>(dat, "amplitude", "data.", 0.5);
  c.data_file = rd.get<std::string>(dat, "file", "data.", "");
  if (c.data == "file" && c.data_file.empty()) errors.push_back("data.file is required for expr 'file'");
  if ((c.data == "green" || c.data == "dipole") && static_cast<int>(c.source.size()) != n)
    errors.push_back("data.source must be a point of the cell dimension");
  if ((c.data == "dipole" || (c.data == "green" && c.family == "laplace")) && static_cast<int>(c.sink.size()) != n)
    errors.push_back("data.sink must be a point of the cell dimension (Laplace data is a source-sink pair)");

  const json ev = rd.section(root, "eval");
  rd.allowed(ev, "eval.", {"points", "times"});
  c.points = rd.get<std::vector<std::vector<double>>>(ev, "points", "eval.", {});
  c.times = rd.get<std::vector<double>>(ev, "times", "eval.", {0.1});
  if (c.command == "eval-green" && c.points.empty()) errors.push_back("missing required key 'eval.points'");
  for (const auto& p : c.points)
    if (static_cast<int>(p.size()) != n) errors.push_back("eval.points entries must have one coordinate per dimension");
  for (double t : c.times)
    if (!(t > 0.0)) errors.push_back("eval.times must be positive");

  const json jm = rd.section(root, "jump");
  rd.allowed(jm, "jump.", {"families", "distances", "fine_nodes"});
  c.families = rd.get<std::vector<std::string>>(jm, "families", "jump.", {c.family});
  for (const auto& f : c.families)
    if (!detail::known({"laplace", "helmholtz", "lame", "heat"}, f)) errors.push_back("unknown jump family '" + f + "'");
  c.distances = rd.get<std::vector<double>>(jm, "distances", "jump.", {});
  if (!c.distances.empty() && c.distances.size() < 2) errors.push_back("jump.distances needs at least two entries");
  c.fine_nodes = rd.get<int>(jm, "fine_nodes", "jump.", 1 << 15);

  const json tm = rd.section(root, "time");
  rd.allowed(tm, "time.", {"T", "M"});
  c.T = rd.get<double>(tm, "T", "time.", 1.0);
  c.M = rd.get<int>(tm, "M", "time.", 64);
  if (!(c.T > 0.0)) errors.push_back("time.T must be positive");
  if (c.M < 1) errors.push_back("time.M must be >= 1");

  const json as = rd.section(root, "asymptotics");
  rd.allowed(as, "asymptotics.", {"epsilons", "fit_degree", "center", "probe"});
  c.epsilons = rd.get<std::vector<double>>(as, "epsilons", "asymptotics.", {0.1, 0.05, 0.025, 0.0125});
  c.fit_degree = rd.get<int>(as, "fit_degree", "asymptotics.", 2);
  std::vector<double> mid;
  for (double d : c.cell) mid.push_back(0.5 * d);
  c.center = rd.get<std::vector<double>>(as, "center", "asymptotics.", mid);
  c.probe = rd.get<std::vector<double>>(as, "probe", "asymptotics.", {});
  if (c.command == "asymptotics") {
    if (n != 3 && cell_ok) errors.push_back("asymptotics runs in a three-dimensional cell");
    if (c.family != "helmholtz") errors.push_back("asymptotics requires the helmholtz family");
    if (c.probe.size() != 3) errors.push_back("missing required key 'asymptotics.probe' (3 coordinates)");
    if (c.center.size() != 3) errors.push_back("asymptotics.center needs 3 coordinates");
    for (std::size_t i = 0; i < c.epsilons.size(); ++i)
      if (!(c.epsilons[i] > 0.0) || (i && !(c.epsilons[i] < c.epsilons[i - 1])))
        errors.push_back("asymptotics.epsilons must be positive and strictly decreasing");
    if (c.fit_degree < 0 || c.fit_degree > 3) errors.push_back("asymptotics.fit_degree must be in 0..3");
    if (static_cast<int>(c.epsilons.size()) < c.fit_degree + 2)
      errors.push_back("asymptotics needs at least fit_degree + 2 epsilons");
  }

  const json sw = rd.section(root, "sweep");
  rd.allowed(sw, "sweep.", {"basis", "step", "s_grid"});
  c.basis = rd.get<int>(sw, "basis", "sweep.", 0);
  c.step = rd.get<double>(sw, "step", "sweep.", 0.04);
  c.s_grid = rd.get<std::vector<double>>(sw, "s_grid", "sweep.", shape_grid(c.step));
  if (c.basis < 0) errors.push_back("sweep.basis must be >= 0");
  if (c.command == "shape-sweep") {
    if (n != 2 && cell_ok) errors.push_back("shape-sweep runs in a two-dimensional cell");
    if (c.shape == "sphere") errors.push_back("shape-sweep needs a curve");
  }

  if (root.contains("probes")) {
    if (!root.at("probes").is_array()) {
      errors.push_back("key 'probes' must be an array");
    } else {
      for (const auto& p : root.at("probes")) {
        ProbeSpec ps;
        if (p.is_array()) {
          ps.x = p.get<std::vector<double>>();
        } else if (p.is_object()) {
          rd.allowed(p, "probes[].", {"t", "x"});
          ps.t = rd.get<double>(p, "t", "probes[].", 0.0);
          ps.x = rd.get<std::vector<double>>(p, "x", "probes[].", {});
        }
        if (static_cast<int>(ps.x.size()) != n) errors.push_back("probe points must have one coordinate per dimension");
        if (ps.t <= 0.0) ps.t = c.T;
        if (ps.t > c.T * (1.0 + 1e-12)) errors.push_back("probe times must lie in (0, T]");
        c.probes.push_back(ps);
      }
    }
  }
  if ((c.command == "solve" || c.command == "shape-sweep") && c.probes.empty())
    errors.push_back("missing required key 'probes'");

  c.checks = detail::default_checks(c.command, c.family);
  const json ck = rd.section(root, "checks");
  std::set<std::string> ck_keys;
  for (const auto& [k, v] : c.checks) ck_keys.insert(k);
  rd.allowed(ck, "checks.", ck_keys);
  for (auto& [k, v] : c.checks) v = rd.get<double>(ck, k, "checks.", v);

  const json outj = rd.section(root, "output");
  rd.allowed(outj, "output.", {"csv", "summary", "export"});
  c.csv = rd.get<std::string>(outj, "csv", "output.", c.command + ".csv");
  c.summary = rd.get<std::string>(outj, "summary", "output.", "summary.json");
  c.export_path = rd.get<std::string>(outj, "export", "output.", "");

  const int w = rd.get<int>(root, "workers", "", 1);
  if (w < 1) errors.push_back("workers must be >= 1");
  c.workers = static_cast<unsigned>(std::max(w, 1));

  // resonance: evaluation is allowed, solvers refuse
  if (cell_ok && c.family == "helmholtz" && static_cast<int>(c.eta.size()) == n) {
    WaveParams w;
    w.k = cplx(c.k_re, c.k_im);
    for (int a = 0; a < n; ++a) w.eta[a] = c.eta[a];
    const auto z = resonant_set(make_cell(c.cell), w, c.resonance_tol);
    if (!z.empty())
      c.warnings.push_back("k^2 is resonant (" + std::to_string(z.size()) +
                           " lattice modes); layer operators and solvers will refuse it");
  }

  json r;
  r["command"] = c.command;
  r["cell"] = c.cell;
  r["kernel"] = {{"family", c.family}, {"k", {c.k_re, c.k_im}}, {"eta", c.eta}, {"omega", c.omega},
                 {"crossover", c.crossover}, {"resonance_tol", c.resonance_tol}};
  r["ewald"] = {{"split_scale", c.split_scale}, {"real_radius", c.real_radius},
                {"spectral_radius", c.spectral_radius}, {"tolerance", c.ewald_tolerance}};
  r["geometry"] = {{"shape", c.shape}, {"params", c.shape_params}, {"N", c.N}, {"L", c.L}};
  r["data"] = {{"expr", c.data}, {"source", c.source}, {"sink", c.sink}, {"value", c.data_value},
               {"amplitude", c.data_amplitude}, {"file", c.data_file}};
  r["eval"] = {{"points", c.points}, {"times", c.times}};
  r["jump"] = {{"families", c.families}, {"distances", c.distances}, {"fine_nodes", c.fine_nodes}};
  r["time"] = {{"T", c.T}, {"M", c.M}};
  r["asymptotics"] = {{"epsilons", c.epsilons}, {"fit_degree", c.fit_degree}, {"center", c.center}, {"probe", c.probe}};
  r["sweep"] = {{"basis", c.basis}, {"step", c.step}, {"s_grid", c.s_grid}};
  json pr = json::array();
  for (const auto& p : c.probes) pr.push_back({{"t", p.t}, {"x", p.x}});
  r["probes"] = pr;
  json cj = json::object();
  for (const auto& [k, v] : c.checks) cj[k] = v;
  r["checks"] = cj;
  r["output"] = {{"csv", c.csv}, {"summary", c.summary}, {"export", c.export_path}};
  r["workers"] = c.workers;
  c.resolved = r;
  return out;
}

// ----------------------------------------------------------------- running

struct Check {
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  bool pass = false;
};

struct RunOptions {
  std::string out_dir = ".";
  unsigned workers = 1;
  bool verbose = false;
};

struct RunOutcome {
  int status = 0;
  std::vector<Check> checks;
  std::vector<std::string> artifacts;
  json report;
};

namespace detail {

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class Csv {
 public:
  explicit Csv(const std::vector<std::string>& header) { row(header); }
  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) os_ << (i ? "," : "") << cells[i];
    os_ << "\n";
  }
  std::string str() const { return os_.str(); }

 private:
  std::ostringstream os_;
};

inline Vec to_vec(const std::vector<double>& v) {
  Vec x = Vec::Zero();
  for (std::size_t a = 0; a < v.size() && a < 3; ++a) x[a] = v[a];
  return x;
}

inline std::optional<EwaldParams> ewald_of(const RunConfig& c, const UnitCell& cell, cplx k2, double scale = 1.0) {
  EwaldParams p = EwaldParams::automatic(cell, k2, c.split_scale * scale);
  if (c.real_radius > 0.0) p.real_radius = c.real_radius;
  if (c.spectral_radius > 0.0) p.spectral_radius = c.spectral_radius;
  p.tolerance = c.ewald_tolerance;
  return p;
}

inline KernelFamily kernel_of(const RunConfig& c, const std::string& family, double scale = 1.0) {
  const UnitCell cell = make_cell(c.cell);
  if (family == "laplace") return KernelFamily::make_laplace(cell, ewald_of(c, cell, 0.0, scale));
  if (family == "helmholtz") {
    WaveParams w;
    w.k = cplx(c.k_re, c.k_im);
    w.eta = to_vec(c.eta);
    return KernelFamily::make_helmholtz(cell, w, ewald_of(c, cell, w.k2(), scale), c.resonance_tol);
  }
  if (family == "lame") return KernelFamily::make_lame(cell, LameParams{c.omega}, ewald_of(c, cell, 0.0, scale));
  return KernelFamily::make_heat(cell, c.crossover);
}

inline BoundaryGeometry geometry_of(const RunConfig& c, int N) {
  const auto& p = c.shape_params;
  if (c.shape == "sphere") return make_sphere(Vec(p[0], p[1], p[2]), p[3], c.L);
  CurvePtr curve;
  if (c.shape == "circle") curve = std::make_shared<Circle>(make_vec(p[0], p[1]), p[2]);
  else if (c.shape == "ellipse") curve = std::make_shared<Ellipse>(make_vec(p[0], p[1]), p[2], p[3]);
  else curve = std::make_shared<Kite>(make_vec(p[0], p[1]), p[2]);
  return make_curve(curve, N);
}

/// Samples from a text file: "node value [imag]" (elliptic) or
/// "level node value" (heat); '#' starts a comment.
inline std::map<std::pair<int, int>, cplx> read_samples(const std::string& path, bool heat) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::config, "cannot read data file " + path);
  std::map<std::pair<int, int>, cplx> out;
  std::string line;
  while (std::getline(is, line)) {
    const auto h = line.find('#');
    if (h != std::string::npos) line.erase(h);
    std::istringstream ls(line);
    if (heat) {
      int l, i;
      double v;
      if (ls >> l >> i >> v) out[{l, i}] = v;
    } else {
      int i;
      double re, im = 0.0;
      if (ls >> i >> re) {
        ls >> im;
        out[{0, i}] = cplx(re, im);
      }
    }
  }
  return out;
}

/// Dirichlet data for the elliptic solvers.
inline BoundaryData elliptic_data(const RunConfig& c, const KernelFamily& kf, const BoundaryGeometry& g) {
  const Vec src = to_vec(c.source), snk = to_vec(c.sink);
  if (c.data == "zero") return [](const Vec&, double) { return cplx(0.0); };
  if (c.data == "constant") {
    const double v = c.data_value;
    return [v](const Vec&, double) { return cplx(v); };
  }
  if (c.data == "file") {
    auto samples = std::make_shared<std::map<std::pair<int, int>, cplx>>(read_samples(c.data_file, false));
    if (samples->size() != g.size()) throw Error(ErrorCode::config, "data file does not cover every node");
    auto nodes = std::make_shared<std::vector<Vec>>(g.nodes);
    return [samples, nodes](const Vec& x, double) {
      for (std::size_t i = 0; i < nodes->size(); ++i)
        if (((*nodes)[i] - x).norm() < 1e-14) return samples->at({0, static_cast<int>(i)});
      throw Error(ErrorCode::config, "data file sampled off the nodes");
    };
  }
  if (kf.family == Family::helmholtz) return [&kf, src](const Vec& x, double) { return helmholtz_green(kf, x - src); };
  return [&kf, src, snk](const Vec& x, double) { return cplx(laplace_green(kf, x - src) - laplace_green(kf, x - snk)); };
}

inline HeatData heat_data(const RunConfig& c, const BoundaryGeometry& g) {
  const UnitCell cell = make_cell(c.cell);
  const Vec src = to_vec(c.source);
  if (c.data == "zero") return [](double, const Vec&, double) { return 0.0; };
  if (c.data == "constant") {
    const double v = c.data_value;
    return [v](double t, const Vec&, double) { return v * t; };
  }
  if (c.data == "ramp-cosine") {
    const double a = c.data_amplitude, L = cell.diag[0];
    return [a, L](double t, const Vec& x, double) { return t * (1.0 + a * std::cos(2.0 * pi * x[0] / L)); };
  }
  if (c.data == "file") {
    auto samples = std::make_shared<std::map<std::pair<int, int>, cplx>>(read_samples(c.data_file, true));
    auto nodes = std::make_shared<std::vector<Vec>>(g.nodes);
    const double dt = c.T / c.M;
    return [samples, nodes, dt](double t, const Vec& x, double) {
      const int l = static_cast<int>(std::llround(t / dt));
      for (std::size_t i = 0; i < nodes->size(); ++i)
        if (((*nodes)[i] - x).norm() < 1e-14) {
          const auto it = samples->find({l, static_cast<int>(i)});
          if (it == samples->end()) throw Error(ErrorCode::config, "data file misses a (level, node) sample");
          return it->second.real();
        }
      throw Error(ErrorCode::config, "data file sampled off the nodes");
    };
  }
  return [cell, src](double t, const Vec& x, double) { return heat_green(cell, t, x - src); };
}

inline void add_check(RunOutcome& o, const std::string& name, double value, double threshold, bool pass) {
  o.checks.push_back({name, value, threshold, pass});
}

inline void add_max_check(RunOutcome& o, const std::string& name, double value, double threshold) {
  add_check(o, name, value, threshold, std::isfinite(value) && value <= threshold);
}

// ------------------------------------------------------------ commands

inline std::string run_eval_green(const RunConfig& c, RunOutcome& o) {
  const UnitCell cell = make_cell(c.cell);
  const int n = cell.n;
  std::vector<std::string> head;
  const char* ax[3] = {"x0", "x1", "x2"};
  for (int a = 0; a < n; ++a) head.push_back(ax[a]);
  if (c.family == "heat") head.push_back("t");
  auto comp = [&](const std::string& base) {
    for (int a = 0; a < n; ++a) head.push_back(base + std::to_string(a));
  };
  if (c.family == "laplace" || c.family == "heat") {
    head.push_back("value");
    comp("grad");
  } else if (c.family == "helmholtz") {
    head.push_back("value_re");
    head.push_back("value_im");
    comp("grad_re");
    comp("grad_im");
  } else {
    for (int a = 0; a < n; ++a) comp("g" + std::to_string(a));
  }
  head.push_back("rep_agreement");
  Csv csv(head);
  double worst = 0.0;
  const KernelFamily kf = kernel_of(c, c.family);
  std::vector<KernelFamily> alt;
  if (c.family != "heat") {
    alt.push_back(kernel_of(c, c.family, 0.5));
    alt.push_back(kernel_of(c, c.family, 2.0));
  }
  const std::vector<double> times = c.family == "heat" ? c.times : std::vector<double>{0.0};
  for (const auto& pv : c.points) {
    const Vec x = to_vec(pv);
    for (double t : times) {
      std::vector<std::string> row;
      for (int a = 0; a < n; ++a) row.push_back(fmt(x[a]));
      double agree = 0.0;
      if (c.family == "heat") {
        row.push_back(fmt(t));
        const double v = heat_green(cell, t, x, HeatRep::automatic, c.crossover);
        const Vec gr = heat_green_grad(cell, t, x, HeatRep::automatic, c.crossover);
        row.push_back(fmt(v));
        for (int a = 0; a < n; ++a) row.push_back(fmt(gr[a]));
        agree = std::abs(heat_green(cell, t, x, HeatRep::spatial) - heat_green(cell, t, x, HeatRep::spectral));
      } else if (c.family == "laplace") {
        const auto e = laplace_green_eval(kf, x);
        row.push_back(fmt(e.value));
        for (int a = 0; a < n; ++a) row.push_back(fmt(e.grad[a]));
        for (const auto& k2 : alt)
          agree = std::max(agree, std::abs(laplace_green(k2, x) - e.value) / std::max(1.0, std::abs(e.value)));
      } else if (c.family == "helmholtz") {
        const auto e = helmholtz_green_eval(kf, x);
        row.push_back(fmt(e.value.real()));
        row.push_back(fmt(e.value.imag()));
        for (int a = 0; a < n; ++a) row.push_back(fmt(e.grad[a].real()));
        for (int a = 0; a < n; ++a) row.push_back(fmt(e.grad[a].imag()));
        for (const auto& k2 : alt)
          agree = std::max(agree, std::abs(helmholtz_green(k2, x) - e.value) / std::max(1.0, std::abs(e.value)));
      } else {
        const Mat G = lame_green(kf, x);
        for (int a = 0; a < n; ++a)
          for (int b = 0; b < n; ++b) row.push_back(fmt(G(a, b)));
        for (const auto& k2 : alt)
          agree = std::max(agree, (lame_green(k2, x) - G).cwiseAbs().maxCoeff() / std::max(1.0, G.cwiseAbs().maxCoeff()));
      }
      row.push_back(fmt(agree));
      worst = std::max(worst, agree);
      csv.row(row);
    }
  }
  add_max_check(o, c.family == "heat" ? "spatial-spectral agreement" : "splitting invariance", worst,
                c.checks.at("max_rep_disagreement"));
  o.report["max_rep_disagreement"] = worst;
  return csv.str();
}

inline DensityFn test_density(int comps, int n) {
  return [comps, n](const Vec& y, double) {
    BVec v(comps);
    const double s0 = std::sin(2.0 * pi * y[0]), c1 = std::cos(2.0 * pi * y[1]);
    const double z = n == 3 ? y[2] : 0.0;
    v(0) = 1.0 + 0.5 * s0 + 0.25 * c1 + 0.1 * z;
    if (comps > 1) v(1) = 0.3 - 0.4 * s0 * c1 + 0.2 * z * z;
    if (comps > 2) v(2) = 0.5 * y[0] * y[1] - 0.2;
    return v;
  };
}

inline std::string run_jump_check(const RunConfig& c, const RunOptions& ro, RunOutcome& o) {
  Csv csv({"family", "identity", "side", "nodes", "error", "threshold", "pass"});
  const UnitCell cell = make_cell(c.cell);
  const BoundaryGeometry g = geometry_of(c, c.N);
  json rows = json::array();
  for (const auto& fam : c.families) {
    const KernelFamily kf = kernel_of(c, fam);
    const bool heat = fam == "heat";
    const double thr = heat ? c.checks.at("max_error_heat") : c.checks.at("max_error_elliptic");
    JumpOptions opt;
    opt.distances = c.distances;
    opt.fine_nodes = c.fine_nodes;
    opt.T = c.T;
    opt.M = c.M;
    opt.workers = ro.workers;
    for (auto id : {JumpIdentity::double_layer, JumpIdentity::single_layer_normal})
      for (auto side : {Side::interior, Side::exterior}) {
        JumpReport r;
        if (heat) {
          r = heat_jump_check(kf, g, id, [](double t, const Vec&, double th) { return t * std::cos(th); }, side, opt);
        } else {
          const int comps = fam == "lame" ? cell.n : 1;
          r = jump_check(kf, g, id, test_density(comps, cell.n), side, opt);
        }
        const bool pass = r.error <= thr;
        csv.row({fam, r.identity, r.side, std::to_string(g.size()), fmt(r.error), fmt(thr), pass ? "1" : "0"});
        add_check(o, "jump " + fam + " " + r.identity + " " + r.side, r.error, thr, pass);
        rows.push_back({{"family", fam}, {"identity", r.identity}, {"side", r.side}, {"error", r.error}});
      }
  }
  o.report["rows"] = rows;
  return csv.str();
}

inline std::string run_solve(const RunConfig& c, const RunOptions& ro, RunOutcome& o) {
  const UnitCell cell = make_cell(c.cell);
  const int n = cell.n;
  const KernelFamily kf = kernel_of(c, c.family);
  const BoundaryGeometry g = geometry_of(c, c.N);
  SolveOptions so;
  so.workers = ro.workers;
  SolveResult res;
  const bool manufactured = c.data == "green" || c.data == "dipole" || c.data == "zero" || c.data == "constant";
  std::function<cplx(const Vec&, double)> exact;
  if (c.family == "heat") {
    const HeatData f = heat_data(c, g);
    res = solve_heat_dirichlet_exterior(cell, g, c.T, c.M, f, so, c.crossover);
    if (c.data == "green") {
      const Vec src = to_vec(c.source);
      exact = [cell, src](const Vec& x, double t) { return cplx(heat_green(cell, t, x - src)); };
    } else if (c.data == "zero") {
      exact = [](const Vec&, double) { return cplx(0.0); };
    }
    if (!c.export_path.empty()) {
      const auto op = assemble_heat(kf, g, LayerKind::dlayer, c.T, c.M, ro.workers);
      export_operator(op, (std::filesystem::path(ro.out_dir) / c.export_path).string());
      o.artifacts.push_back(c.export_path);
    }
  } else {
    const BoundaryData f = elliptic_data(c, kf, g);
    if (c.family == "helmholtz") res = solve_helmholtz_dirichlet_exterior(kf, g, f, so);
    else if (c.family == "laplace") res = solve_laplace_dirichlet_exterior(cell, g, f, so);
    else throw Error(ErrorCode::unsupported, "no solver for the " + c.family + " family");
    if (manufactured) exact = [f](const Vec& x, double) { return f(x, 0.0); };
    if (!c.export_path.empty()) {
      const auto op = c.family == "helmholtz" ? assemble_Sboundary(kf, g, ro.workers) : assemble_K(kf, g, ro.workers);
      export_operator(op, (std::filesystem::path(ro.out_dir) / c.export_path).string());
      o.artifacts.push_back(c.export_path);
    }
  }
  add_check(o, "solver residual", res.residual, so.tolerance, res.ok);
  std::vector<std::string> head{"probe"};
  const char* ax[3] = {"x0", "x1", "x2"};
  for (int a = 0; a < n; ++a) head.push_back(ax[a]);
  for (const char* h : {"t", "u_re", "u_im", "exact_re", "exact_im", "error"}) head.push_back(h);
  Csv csv(head);
  double worst = 0.0, period = 0.0;
  const bool relative = c.family != "heat";
  for (std::size_t q = 0; q < c.probes.size(); ++q) {
    const Vec x = to_vec(c.probes[q].x);
    const double t = c.probes[q].t;
    const cplx u = solution_at(kf, g, res, x, t);
    std::vector<std::string> row{std::to_string(q)};
    for (int a = 0; a < n; ++a) row.push_back(fmt(x[a]));
    row.push_back(fmt(c.family == "heat" ? t : 0.0));
    row.push_back(fmt(u.real()));
    row.push_back(fmt(u.imag()));
    if (exact) {
      const cplx e = exact(x, t);
      const double err = relative && std::abs(e) > 0.0 ? std::abs(u - e) / std::abs(e) : std::abs(u - e);
      worst = std::max(worst, err);
      row.push_back(fmt(e.real()));
      row.push_back(fmt(e.imag()));
      row.push_back(fmt(err));
    } else {
      row.insert(row.end(), {"", "", ""});
    }
    csv.row(row);
    for (int a = 0; a < n; ++a) {
      Vec s = Vec::Zero();
      s[a] = cell.diag[a];
      const cplx phase = std::exp(cplx(0.0, kf.eta().dot(s)));
      const cplx us = solution_at(kf, g, res, x + s, t);
      period = std::max(period, std::abs(us - phase * u) / std::max(1.0, std::abs(u)));
    }
  }
  if (exact) add_max_check(o, relative ? "probe relative error" : "probe error", worst, c.checks.at("max_error"));
  add_max_check(o, "probe periodicity", period, c.checks.at("max_periodicity"));
  o.report["residual"] = res.residual;
  o.report["condition"] = res.condition;
  o.report["representation"] = to_string(res.representation);
  o.report["max_probe_error"] = worst;
  o.report["periodicity_error"] = period;
  if (!res.ok) o.report["solver_message"] = res.message;
  return csv.str();
}

inline std::string run_asymptotics(const RunConfig& c, const RunOptions& ro, RunOutcome& o) {
  const KernelFamily kf = kernel_of(c, "helmholtz");
  const BoundaryGeometry ref = make_sphere(Vec::Zero(), 1.0, c.L);
  const double v = c.data_value;
  BoundaryData g = [v](const Vec&, double) { return cplx(v); };
  if (c.data == "zero") g = [](const Vec&, double) { return cplx(0.0); };
  const auto rep = run_epsilon_sweep(kf, ref, to_vec(c.center), g, c.epsilons, to_vec(c.probe), c.fit_degree, ro.workers);
  Csv csv({"epsilon", "u_re", "u_im", "scaled_re", "scaled_im", "error", "condition", "status"});
  for (std::size_t i = 0; i < rep.epsilons.size(); ++i)
    csv.row({fmt(rep.epsilons[i]), fmt(rep.probe_values[i].real()), fmt(rep.probe_values[i].imag()),
             fmt(rep.scaled[i].real()), fmt(rep.scaled[i].imag()), fmt(rep.errors[i]), fmt(rep.conditions[i]),
             rep.solved[i] ? "ok" : "failed"});
  json fit = json::array();
  for (const auto& a : rep.fit) fit.push_back({a.real(), a.imag()});
  o.report["oracle_a1"] = {rep.oracle_a1.real(), rep.oracle_a1.imag()};
  o.report["fit"] = fit;
  o.report["relative_gap"] = rep.relative_gap;
  o.report["halving_ratios"] = rep.halving_ratios;
  json fails = json::array();
  for (const auto& f : rep.failures)
    if (!f.empty()) fails.push_back(f);
  o.report["failures"] = fails;
  const bool zero = std::abs(rep.oracle_a1) == 0.0;
  add_check(o, "fit succeeded", rep.fitted ? 1.0 : 0.0, 1.0, rep.fitted);
  if (!zero) {
    add_max_check(o, "relative gap to leading coefficient", rep.relative_gap, c.checks.at("max_relative_gap"));
    for (std::size_t i = 0; i < rep.halving_ratios.size(); ++i) {
      const double r = rep.halving_ratios[i];
      add_check(o, "halving ratio " + std::to_string(i), r, c.checks.at("ratio_min"),
                r >= c.checks.at("ratio_min") && r <= c.checks.at("ratio_max"));
    }
  }
  return csv.str();
}

inline std::string run_shape_sweep_cmd(const RunConfig& c, const RunOptions& ro, RunOutcome& o) {
  const UnitCell cell = make_cell(c.cell);
  const auto& p = c.shape_params;
  CurvePtr ref;
  if (c.shape == "circle") ref = std::make_shared<Circle>(make_vec(p[0], p[1]), p[2]);
  else if (c.shape == "ellipse") ref = std::make_shared<Ellipse>(make_vec(p[0], p[1]), p[2], p[3]);
  else ref = std::make_shared<Kite>(make_vec(p[0], p[1]), p[2]);
  const BoundaryGeometry g0 = make_curve(ref, c.N);
  const HeatData f = heat_data(c, g0);
  std::vector<Probe> probes;
  for (const auto& ps : c.probes) probes.push_back({ps.t, to_vec(ps.x)});
  ShapeSweepOptions so;
  so.N = c.N;
  so.T = c.T;
  so.M = c.M;
  so.crossover = c.crossover;
  so.workers = ro.workers;
  const auto rep = run_shape_sweep(cell, ref, c.basis, c.s_grid, f, probes, so);
  std::vector<std::string> head{"s"};
  for (std::size_t q = 0; q < probes.size(); ++q) head.push_back("u" + std::to_string(q));
  head.push_back("status");
  Csv csv(head);
  for (std::size_t i = 0; i < rep.s.size(); ++i) {
    std::vector<std::string> row{fmt(rep.s[i])};
    for (double v : rep.values[i]) row.push_back(fmt(v));
    row.push_back(rep.solved[i] ? "ok" : "skipped");
    csv.row(row);
  }
  o.report["step"] = rep.step;
  o.report["derivative_coarse"] = rep.derivative_coarse;
  o.report["derivative_fine"] = rep.derivative_fine;
  o.report["stability_ratio"] = rep.stability_ratio;
  o.report["periodicity_error"] = rep.periodicity_error;
  o.report["spread"] = rep.spread;
  json fails = json::array();
  for (const auto& s : rep.failures)
    if (!s.empty()) fails.push_back(s);
  o.report["failures"] = fails;
  bool all_zero = true;
  for (double s : c.s_grid) all_zero = all_zero && s == 0.0;
  if (all_zero) add_max_check(o, "identity family spread", rep.spread, c.checks.at("max_identity_spread"));
  const double dev = c.checks.at("max_ratio_deviation");
  for (std::size_t k = 0; k < rep.stability_ratio.size(); ++k)
    for (std::size_t q = 0; q < rep.stability_ratio[k].size(); ++q) {
      const double r = rep.stability_ratio[k][q];
      add_check(o, "order " + std::to_string(k + 1) + " stability ratio probe " + std::to_string(q), r, dev,
                std::abs(r - 1.0) <= dev);
    }
  add_max_check(o, "probe periodicity", rep.periodicity_error, c.checks.at("max_periodicity"));
  std::size_t solved = 0;
  for (bool s : rep.solved) solved += s;
  add_check(o, "all shapes solved", double(solved), double(rep.s.size()), solved == rep.s.size());
  return csv.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& s) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw Error(ErrorCode::config, "cannot write " + p.string());
  os << s;
}

}  // namespace detail

/// Executes a validated configuration and writes the CSV table, the JSON
/// summary and the resolved configuration into ro.out_dir.
inline RunOutcome run(const RunConfig& c, const RunOptions& ro, std::ostream& log) {
  namespace fs = std::filesystem;
  RunOutcome o;
  fs::create_directories(ro.out_dir);
  const std::string resolved = c.resolved.dump(2) + "\n";
  detail::write_file(fs::path(ro.out_dir) / "resolved_config.json", resolved);
  log << "perpot " << c.command << ": resolved configuration\n" << resolved;
  for (const auto& w : c.warnings) log << "warning: " << w << "\n";
  std::string table;
  std::string error;
  try {
    if (c.command == "eval-green") table = detail::run_eval_green(c, o);
    else if (c.command == "jump-check") table = detail::run_jump_check(c, ro, o);
    else if (c.command == "solve") table = detail::run_solve(c, ro, o);
    else if (c.command == "asymptotics") table = detail::run_asymptotics(c, ro, o);
    else table = detail::run_shape_sweep_cmd(c, ro, o);
  } catch (const Error& e) {
    error = e.what();
  } catch (const std::exception& e) {
    error = e.what();
  }
  if (!table.empty()) {
    detail::write_file(fs::path(ro.out_dir) / c.csv, table);
    o.artifacts.insert(o.artifacts.begin(), c.csv);
  }
  bool pass = error.empty();
  for (const auto& ck : o.checks) pass = pass && ck.pass;
  o.status = pass ? 0 : 1;
  json s;
  s["command"] = c.command;
  s["status"] = pass ? "pass" : "fail";
  if (!error.empty()) s["error"] = error;
  json checks = json::array();
  for (const auto& ck : o.checks) {
    checks.push_back({{"name", ck.name}, {"value", ck.value}, {"threshold", ck.threshold}, {"pass", ck.pass}});
    if (ro.verbose || !ck.pass)
      log << (ck.pass ? "  ok    " : "  FAIL  ") << ck.name << " = " << detail::fmt(ck.value) << " (threshold "
          << detail::fmt(ck.threshold) << ")\n";
  }
  s["checks"] = checks;
  s["warnings"] = c.warnings;
  s["report"] = o.report;
  o.artifacts.push_back(c.summary);
  o.artifacts.push_back("resolved_config.json");
  s["artifacts"] = o.artifacts;
  detail::write_file(fs::path(ro.out_dir) / c.summary, s.dump(2) + "\n");
  if (!error.empty()) log << "error: " << error << "\n";
  log << "status: " << (pass ? "pass" : "fail") << "\n";
  return o;
}

}  // namespace perpot::cli
