// Copyright 2026 The dhist Authors
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

// cli.hpp: config parsing, the validate/decohere/records/classicality
// pipeline, JSON reports and text tables.

#pragma once

#include <Eigen/Core>

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dhist/classicality.hpp"
#include "dhist/decoherence.hpp"
#include "dhist/models.hpp"
#include "dhist/records.hpp"
#include "json.hpp"

namespace dhist::cli {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

inline constexpr const char* kVersion = "0.1.0";
inline constexpr int kSchemaVersion = 1;

enum ExitCode : int { ok = 0, io_error = 1, validation_error = 2, not_converged = 3 };

struct ModelSpec {
  std::string name;
  json params = json::object();
};

struct Tolerances {
  double decoherence = tol::decoherence;
  double solver = tol::solver;
};

inline const std::vector<std::string>& known_commands() {
  static const std::vector<std::string> c = {"validate", "decohere", "records", "classicality"};
  return c;
}

struct Config {
  std::optional<HistorySet> history_set;
  std::optional<ModelSpec> model;
  Tolerances tolerances;
  std::vector<std::string> commands = known_commands();
  std::uint64_t seed = 0;
  std::size_t max_iterations = 10000;
  SolverMethod solver = SolverMethod::newton;
  ComplementPolicy complement = ComplementPolicy::to_vanishing;
};

// ------------------------------------------------------------- parsing

namespace detail {

inline std::string child(const std::string& path, const std::string& key) { return path + "/" + key; }
inline std::string child(const std::string& path, std::size_t i) {
  return path + "/" + std::to_string(i);
}

[[noreturn]] inline void fail(const std::string& path, const std::string& what) {
  throw Error(Errc::parse_error, "at " + (path.empty() ? std::string("/") : path) + ": " + what);
}

inline void reject_unknown(const json& j, const std::string& path, const std::set<std::string>& allowed) {
  if (!j.is_object()) fail(path, "expected an object");
  for (const auto& [key, _] : j.items()) {
    if (!allowed.count(key)) fail(child(path, key), "unknown key");
  }
}

inline double number(const json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  return j.get<double>();
}

inline cplx scalar(const json& j, const std::string& path) {
  if (j.is_number()) return {j.get<double>(), 0.0};
  if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number()) {
    return {j[0].get<double>(), j[1].get<double>()};
  }
  fail(path, "expected a number or an [re, im] pair");
}

inline Matrix matrix(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) fail(path, "expected a non-empty array of rows");
  const Index n = static_cast<Index>(j.size());
  Matrix m(n, n);
  for (Index r = 0; r < n; ++r) {
    const json& row = j[static_cast<std::size_t>(r)];
    const std::string rp = child(path, static_cast<std::size_t>(r));
    if (!row.is_array() || static_cast<Index>(row.size()) != n) fail(rp, "expected a row of length " + std::to_string(n));
    for (Index c = 0; c < n; ++c) m(r, c) = scalar(row[static_cast<std::size_t>(c)], child(rp, static_cast<std::size_t>(c)));
  }
  return m;
}

inline Vector vector(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) fail(path, "expected a non-empty array");
  Vector v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Index>(i)) = scalar(j[i], child(path, i));
  return v;
}

inline std::string string_value(const json& j, const std::string& path) {
  if (!j.is_string()) fail(path, "expected a string");
  return j.get<std::string>();
}

struct Layout {
  Index dim = 0;
  std::vector<Index> factors;  // empty unless qubit_factors was given
};

// Embeds a single-factor operator at `site`.
inline Matrix embed(const Layout& layout, std::size_t site, const Matrix& op) {
  Matrix out = Matrix::Identity(1, 1);
  for (std::size_t k = 0; k < layout.factors.size(); ++k) {
    const Index f = layout.factors[k];
    out = kron(out, k == site ? op : Matrix(Matrix::Identity(f, f)));
  }
  return out;
}

inline Matrix pauli_matrix(char c, const std::string& path) {
  switch (c) {
    case 'i': return pauli::identity();
    case 'x': return pauli::x();
    case 'y': return pauli::y();
    case 'z': return pauli::z();
    default: fail(path, std::string("unknown Pauli letter '") + c + "'");
  }
}

inline Matrix hamiltonian(const json& j, const Layout& layout, const std::string& path) {
  if (j.is_string()) {
    if (j.get<std::string>() != "zero") fail(path, "the only named Hamiltonian is \"zero\"");
    return Matrix::Zero(layout.dim, layout.dim);
  }
  if (j.is_object()) {
    reject_unknown(j, path, {"pauli"});
    if (!j.contains("pauli") || !j["pauli"].is_array()) fail(child(path, "pauli"), "expected an array of terms");
    for (Index f : layout.factors) {
      if (f != 2) fail(path, "Pauli terms need every qubit factor to be 2");
    }
    if (layout.factors.empty()) fail(path, "Pauli terms need qubit_factors");
    Matrix h = Matrix::Zero(layout.dim, layout.dim);
    for (std::size_t t = 0; t < j["pauli"].size(); ++t) {
      const json& term = j["pauli"][t];
      const std::string tp = child(child(path, "pauli"), t);
      reject_unknown(term, tp, {"term", "coefficient"});
      if (!term.contains("term") || !term.contains("coefficient")) fail(tp, "needs term and coefficient");
      const std::string word = string_value(term["term"], child(tp, "term"));
      if (word.size() != layout.factors.size()) fail(child(tp, "term"), "length must equal the qubit count");
      Matrix m = Matrix::Identity(1, 1);
      for (char c : word) m = kron(m, pauli_matrix(c, child(tp, "term")));
      h += number(term["coefficient"], child(tp, "coefficient")) * m;
    }
    return h;
  }
  Matrix m = matrix(j, path);
  if (m.rows() != layout.dim) fail(path, "dimension " + std::to_string(m.rows()) + " does not match " + std::to_string(layout.dim));
  return m;
}

inline DensityMatrix initial_state(const json& j, const Layout& layout, const std::string& path) {
  if (j.is_string()) {
    if (j.get<std::string>() != "ind") fail(path, "the only named state is \"ind\"");
    return DensityMatrix::maximally_mixed(layout.dim);
  }
  reject_unknown(j, path, {"vector", "density_matrix"});
  if (j.size() != 1) fail(path, "give exactly one of vector or density_matrix");
  if (j.contains("vector")) {
    const Vector v = vector(j["vector"], child(path, "vector"));
    if (v.size() != layout.dim) fail(child(path, "vector"), "length does not match the dimension");
    return DensityMatrix::from_state(StateVector(v));
  }
  const Matrix m = matrix(j["density_matrix"], child(path, "density_matrix"));
  if (m.rows() != layout.dim) fail(child(path, "density_matrix"), "dimension does not match");
  return DensityMatrix(m);
}

inline std::vector<Vector> basis_states(const json& fam, const Layout& layout, const std::string& path,
                                        std::optional<std::size_t>& site) {
  const std::string name = string_value(fam["basis"], child(path, "basis"));
  if (name == "computational") {
    if (fam.contains("qubit")) fail(child(path, "qubit"), "not used with the computational basis");
    std::vector<Vector> out;
    for (Index i = 0; i < layout.dim; ++i) out.push_back(Matrix::Identity(layout.dim, layout.dim).col(i));
    return out;
  }
  if (name != "x" && name != "y" && name != "z") fail(child(path, "basis"), "expected computational, x, y or z");
  std::size_t q = 0;
  if (fam.contains("qubit")) {
    const json& qj = fam["qubit"];
    if (!qj.is_number_unsigned()) fail(child(path, "qubit"), "expected a qubit index");
    q = qj.get<std::size_t>();
  }
  if (layout.factors.empty()) {
    if (layout.dim != 2) fail(child(path, "basis"), "qubit bases need dimension 2 or qubit_factors");
  } else if (q >= layout.factors.size() || layout.factors[q] != 2) {
    fail(child(path, "qubit"), "not a qubit factor");
  }
  site = q;
  std::vector<Vector> out;
  for (const Matrix& p : dhist::detail::qubit_basis(name[0]).first) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(p);
    out.push_back(es.eigenvectors().col(1));
  }
  return out;
}

inline ScheduledFamily family(const json& fam, const Layout& layout, const std::string& path) {
  reject_unknown(fam, path, {"time", "projectors", "basis", "qubit", "grouping", "labels"});
  if (!fam.contains("time")) fail(child(path, "time"), "missing");
  const double time = number(fam["time"], child(path, "time"));
  std::vector<std::string> labels;
  if (fam.contains("labels")) {
    if (!fam["labels"].is_array()) fail(child(path, "labels"), "expected an array of strings");
    for (std::size_t i = 0; i < fam["labels"].size(); ++i) {
      labels.push_back(string_value(fam["labels"][i], child(child(path, "labels"), i)));
    }
  }
  std::vector<Projector> ps;
  if (fam.contains("projectors")) {
    if (fam.contains("basis") || fam.contains("grouping") || fam.contains("qubit")) {
      fail(path, "projectors cannot be combined with basis, qubit or grouping");
    }
    const json& list = fam["projectors"];
    if (!list.is_array() || list.empty()) fail(child(path, "projectors"), "expected a non-empty array");
    for (std::size_t i = 0; i < list.size(); ++i) {
      const std::string pp = child(child(path, "projectors"), i);
      Matrix m = matrix(list[i], pp);
      if (m.rows() != layout.dim) fail(pp, "dimension does not match");
      ps.emplace_back(std::move(m));
    }
  } else if (fam.contains("basis")) {
    std::optional<std::size_t> site;
    const std::vector<Vector> states = basis_states(fam, layout, path, site);
    std::vector<std::vector<std::size_t>> groups;
    if (fam.contains("grouping")) {
      const json& g = fam["grouping"];
      if (!g.is_array()) fail(child(path, "grouping"), "expected an array of index arrays");
      std::vector<int> seen(states.size(), 0);
      for (std::size_t b = 0; b < g.size(); ++b) {
        const std::string gp = child(child(path, "grouping"), b);
        if (!g[b].is_array() || g[b].empty()) fail(gp, "expected a non-empty index array");
        groups.emplace_back();
        for (std::size_t i = 0; i < g[b].size(); ++i) {
          if (!g[b][i].is_number_unsigned() || g[b][i].get<std::size_t>() >= states.size()) {
            fail(child(gp, i), "basis index out of range");
          }
          const std::size_t idx = g[b][i].get<std::size_t>();
          if (seen[idx]++) fail(child(gp, i), "basis index used twice");
          groups.back().push_back(idx);
        }
      }
      for (std::size_t i = 0; i < seen.size(); ++i) {
        if (!seen[i]) fail(child(path, "grouping"), "basis index " + std::to_string(i) + " not covered");
      }
    } else {
      for (std::size_t i = 0; i < states.size(); ++i) groups.push_back({i});
    }
    for (const auto& group : groups) {
      const Index local = states.front().size();
      Matrix p = Matrix::Zero(local, local);
      for (std::size_t i : group) p += states[i] * states[i].adjoint();
      ps.emplace_back(site && !layout.factors.empty() ? embed(layout, *site, p) : p);
    }
    if (labels.empty() && !fam.contains("grouping") && site) {
      labels = dhist::detail::qubit_basis(string_value(fam["basis"], "")[0]).second;
    }
  } else {
    fail(path, "needs projectors or basis");
  }
  return make_family(time, std::move(ps), std::move(labels));
}

inline Layout layout(const json& j) {
  Layout l;
  if (j.contains("dimension") == j.contains("qubit_factors")) {
    fail("", "give exactly one of dimension or qubit_factors");
  }
  if (j.contains("dimension")) {
    if (!j["dimension"].is_number_unsigned() || j["dimension"].get<std::int64_t>() < 1) {
      fail("/dimension", "expected a positive integer");
    }
    l.dim = j["dimension"].get<Index>();
  } else {
    const json& f = j["qubit_factors"];
    if (!f.is_array() || f.empty()) fail("/qubit_factors", "expected a non-empty array of factor sizes");
    l.dim = 1;
    for (std::size_t i = 0; i < f.size(); ++i) {
      if (!f[i].is_number_unsigned() || f[i].get<std::int64_t>() < 1) fail(child("/qubit_factors", i), "expected a positive integer");
      l.factors.push_back(f[i].get<Index>());
      l.dim *= l.factors.back();
    }
  }
  if (l.dim > 4096) fail("", "dimension above 4096 is not supported");
  return l;
}

inline SolverMethod solver_method(const std::string& s, const std::string& path) {
  if (s == "newton") return SolverMethod::newton;
  if (s == "bfgs") return SolverMethod::bfgs;
  if (s == "gradient") return SolverMethod::gradient;
  fail(path, "expected newton, bfgs or gradient");
}

}  // namespace detail

inline ModelSpec parse_model_spec(const json& j, const std::string& path) {
  detail::reject_unknown(j, path, {"name", "params"});
  if (!j.contains("name")) detail::fail(detail::child(path, "name"), "missing");
  ModelSpec spec{detail::string_value(j["name"], detail::child(path, "name")), json::object()};
  if (j.contains("params")) {
    if (!j["params"].is_object()) detail::fail(detail::child(path, "params"), "expected an object");
    spec.params = j["params"];
  }
  return spec;
}

// "k=v,k=v" with numeric values where they parse as numbers.
inline json parse_params(const std::string& text) {
  json out = json::object();
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw Error(Errc::parse_error, "--param entry '" + item + "' is not k=v");
    }
    const std::string key = item.substr(0, eq), value = item.substr(eq + 1);
    char* end = nullptr;
    const double x = std::strtod(value.c_str(), &end);
    if (!value.empty() && end == value.c_str() + value.size()) {
      out[key] = x;
    } else {
      out[key] = value;
    }
  }
  return out;
}

inline Config parse_config(const json& j) {
  detail::reject_unknown(j, "", {"dimension", "qubit_factors", "hamiltonian", "t0", "initial_state",
                                 "families", "tolerances", "commands", "seed", "model", "solver"});
  Config c;
  if (j.contains("tolerances")) {
    const json& t = j["tolerances"];
    detail::reject_unknown(t, "/tolerances", {"decoherence", "solver"});
    if (t.contains("decoherence")) c.tolerances.decoherence = detail::number(t["decoherence"], "/tolerances/decoherence");
    if (t.contains("solver")) c.tolerances.solver = detail::number(t["solver"], "/tolerances/solver");
    if (!(c.tolerances.decoherence > 0.0)) detail::fail("/tolerances/decoherence", "must be positive");
    if (!(c.tolerances.solver > 0.0)) detail::fail("/tolerances/solver", "must be positive");
  }
  if (j.contains("solver")) {
    const json& s = j["solver"];
    detail::reject_unknown(s, "/solver", {"method", "max_iterations", "complement_policy"});
    if (s.contains("method")) c.solver = detail::solver_method(detail::string_value(s["method"], "/solver/method"), "/solver/method");
    if (s.contains("max_iterations")) {
      if (!s["max_iterations"].is_number_unsigned()) detail::fail("/solver/max_iterations", "expected a positive integer");
      c.max_iterations = s["max_iterations"].get<std::size_t>();
    }
    if (s.contains("complement_policy")) {
      const std::string p = detail::string_value(s["complement_policy"], "/solver/complement_policy");
      if (p == "to-vanishing") {
        c.complement = ComplementPolicy::to_vanishing;
      } else if (p == "to-first") {
        c.complement = ComplementPolicy::to_first;
      } else {
        detail::fail("/solver/complement_policy", "expected to-vanishing or to-first");
      }
    }
  }
  if (j.contains("commands")) {
    const json& cmds = j["commands"];
    if (!cmds.is_array()) detail::fail("/commands", "expected an array of command names");
    c.commands.clear();
    for (std::size_t i = 0; i < cmds.size(); ++i) {
      const std::string name = detail::string_value(cmds[i], detail::child("/commands", i));
      const auto& known = known_commands();
      if (std::find(known.begin(), known.end(), name) == known.end()) {
        detail::fail(detail::child("/commands", i), "unknown command '" + name + "'");
      }
      c.commands.push_back(name);
    }
  }
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) detail::fail("/seed", "expected a nonnegative integer");
    c.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("model")) {
    for (const char* key : {"dimension", "qubit_factors", "hamiltonian", "t0", "initial_state", "families"}) {
      if (j.contains(key)) detail::fail(std::string("/") + key, "cannot be combined with model");
    }
    c.model = parse_model_spec(j["model"], "/model");
    return c;
  }
  const detail::Layout l = detail::layout(j);
  for (const char* key : {"hamiltonian", "initial_state", "families"}) {
    if (!j.contains(key)) detail::fail(std::string("/") + key, "missing");
  }
  const Matrix h = detail::hamiltonian(j["hamiltonian"], l, "/hamiltonian");
  const double t0 = j.contains("t0") ? detail::number(j["t0"], "/t0") : 0.0;
  DensityMatrix rho = detail::initial_state(j["initial_state"], l, "/initial_state");
  if (!j["families"].is_array()) detail::fail("/families", "expected an array");
  std::vector<ScheduledFamily> fams;
  for (std::size_t i = 0; i < j["families"].size(); ++i) {
    fams.push_back(detail::family(j["families"][i], l, detail::child("/families", i)));
  }
  c.history_set.emplace(HermitianOperator(h), t0, std::move(rho), std::move(fams));
  return c;
}

// ---------------------------------------------------------------- models

namespace detail {

inline double param_number(const json& p, const std::string& key, double fallback) {
  if (!p.contains(key)) return fallback;
  if (!p[key].is_number()) throw Error(Errc::invalid_model, "parameter " + key + " must be numeric");
  return p[key].get<double>();
}

inline std::string param_string(const json& p, const std::string& key, const std::string& fallback) {
  if (!p.contains(key)) return fallback;
  if (p[key].is_string()) return p[key].get<std::string>();
  if (p[key].is_number()) {
    std::ostringstream os;
    os << p[key].get<double>();
    return os.str();
  }
  throw Error(Errc::invalid_model, "parameter " + key + " must be a string");
}

inline void check_params(const json& p, const std::set<std::string>& allowed, const std::string& model) {
  for (const auto& [key, _] : p.items()) {
    if (!allowed.count(key)) throw Error(Errc::invalid_model, "model " + model + " has no parameter '" + key + "'");
  }
}

inline cplx param_complex(const json& p, const std::string& key, double fallback) {
  if (!p.contains(key)) return {fallback, 0.0};
  const json& v = p[key];
  if (v.is_number()) return {v.get<double>(), 0.0};
  if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number()) {
    return {v[0].get<double>(), v[1].get<double>()};
  }
  throw Error(Errc::invalid_model, "parameter " + key + " must be a number or [re, im]");
}

inline Index param_integer(const json& p, const std::string& key, Index fallback) {
  const double x = param_number(p, key, static_cast<double>(fallback));
  if (x != std::floor(x)) throw Error(Errc::invalid_model, "parameter " + key + " must be an integer");
  return static_cast<Index>(x);
}

}  // namespace detail

inline HistorySet build_model(const ModelSpec& spec, std::uint64_t seed) {
  const json& p = spec.params;
  const double pi = std::acos(-1.0);
  if (spec.name == "measurement") {
    detail::check_params(p, {"a", "b"}, spec.name);
    return measurement_model(detail::param_complex(p, "a", 1.0 / std::sqrt(2.0)),
                             detail::param_complex(p, "b", 1.0 / std::sqrt(2.0)))
        .history_set;
  }
  if (spec.name == "environment") {
    detail::check_params(p, {"n_env", "theta"}, spec.name);
    return environment_model(static_cast<int>(detail::param_integer(p, "n_env", 4)),
                             detail::param_number(p, "theta", pi / 4))
        .history_set;
  }
  if (spec.name == "random") {
    detail::check_params(p, {"seed", "dim", "n_times"}, spec.name);
    const Index s = detail::param_integer(p, "seed", static_cast<Index>(seed));
    if (s < 0) throw Error(Errc::invalid_model, "seed must be nonnegative");
    return random_model(static_cast<std::uint64_t>(s), detail::param_integer(p, "dim", 4),
                        static_cast<std::size_t>(detail::param_integer(p, "n_times", 2)))
        .history_set;
  }
  if (spec.name == "qubit") {
    detail::check_params(p, {"axes", "hamiltonian", "state", "dt"}, spec.name);
    const std::string axes = detail::param_string(p, "axes", "zxz");
    const std::string h = detail::param_string(p, "hamiltonian", "0");
    Matrix ham = Matrix::Zero(2, 2);
    if (h == "x") {
      ham = pauli::x();
    } else if (h == "y") {
      ham = pauli::y();
    } else if (h == "z") {
      ham = pauli::z();
    } else if (h != "0") {
      throw Error(Errc::invalid_model, "qubit hamiltonian must be 0, x, y or z");
    }
    const std::string state = detail::param_string(p, "state", "ind");
    const DensityMatrix rho =
        state == "ind" ? DensityMatrix::maximally_mixed(2) : DensityMatrix::from_state(qubit_state(state));
    return qubit_sequence(axes, ham, rho, detail::param_number(p, "dt", 1.0));
  }
  throw Error(Errc::invalid_model, "unknown model '" + spec.name + "'");
}

// ---------------------------------------------------------------- report

namespace detail {

inline ordered_json complex_json(cplx z) { return ordered_json::array({z.real(), z.imag()}); }

inline ordered_json matrix_json(const Matrix& m) {
  ordered_json rows = ordered_json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    ordered_json row = ordered_json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(complex_json(m(r, c)));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline ordered_json real_matrix_json(const RealMatrix& m) {
  ordered_json rows = ordered_json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    ordered_json row = ordered_json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline ordered_json strings_json(const std::vector<std::string>& v) {
  ordered_json a = ordered_json::array();
  for (const auto& s : v) a.push_back(s);
  return a;
}

inline ordered_json numbers_json(const std::vector<double>& v) {
  ordered_json a = ordered_json::array();
  for (double x : v) a.push_back(x);
  return a;
}

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace detail

// Record matrices are embedded up to this dimension.
inline constexpr Index kRecordMatrixLimit = 64;

inline ordered_json validate_section(const HistorySet& hs) {
  ordered_json v;
  v["status"] = "ok";
  v["dimension"] = hs.dim();
  v["t0"] = hs.t0();
  v["family_count"] = hs.families().size();
  v["history_count"] = hs.history_count();
  v["initial_state_pure"] = hs.rho().is_pure();
  ordered_json fams = ordered_json::array();
  for (const ScheduledFamily& f : hs.families()) {
    ordered_json fj;
    fj["time"] = f.time();
    fj["labels"] = detail::strings_json(f.labels());
    ordered_json ranks = ordered_json::array();
    for (const Projector& p : f.projectors()) ranks.push_back(p.rank());
    fj["ranks"] = ranks;
    fams.push_back(std::move(fj));
  }
  v["families"] = fams;
  v["sum_identity_deviation"] = hs.dim() <= 256 ? ordered_json(sum_identity_check(hs).max_deviation)
                                                : ordered_json(nullptr);
  v["tolerance"] = tol::herm;
  return v;
}

inline ordered_json decohere_section(const HistorySet& hs, double tolerance) {
  const DecoherenceMatrix d = decoherence_matrix(hs, DecoherenceOptions{tolerance, tol::herm, DecoherencePath::automatic});
  const DecoherenceReport r = classify(d);
  ordered_json s;
  s["tolerance"] = tolerance;
  s["path"] = hs.rho().is_pure() ? "pure" : "dense";
  s["labels"] = detail::strings_json(d.labels);
  s["entries"] = detail::matrix_json(d.entries);
  s["level"] = std::string(to_string(r.level));
  s["max_weak_violation"] = r.max_weak_violation;
  s["max_medium_violation"] = r.max_medium_violation;
  s["max_normalized_overlap"] = r.max_normalized_overlap;
  s["normalized_overlaps"] = detail::real_matrix_json(r.normalized_overlaps);
  ordered_json ax;
  ax["hermiticity"] = d.axioms.hermiticity;
  ax["min_diagonal"] = d.axioms.min_diagonal;
  ax["imag_diagonal"] = d.axioms.imag_diagonal;
  ax["normalization"] = d.axioms.normalization;
  ax["tolerance"] = tol::herm;
  s["axioms"] = ax;
  try {
    const ProbabilityTable p = probabilities(d);
    ordered_json pj;
    pj["labels"] = detail::strings_json(p.labels);
    pj["values"] = detail::numbers_json(p.p);
    pj["sum"] = p.sum;
    s["probabilities"] = pj;
    s["probabilities_error"] = nullptr;
  } catch (const Error& e) {
    s["probabilities"] = nullptr;
    s["probabilities_error"] = e.what();
  }
  return s;
}

inline ordered_json records_section(const HistorySet& hs, double tolerance, ComplementPolicy policy) {
  ordered_json s;
  s["tolerance"] = tolerance;
  s["complement_policy"] = std::string(to_string(policy));
  s["initial_state_pure"] = hs.rho().is_pure();
  std::optional<RecordSet> rs;
  try {
    const RecordOptions opts{tolerance, policy};
    rs = hs.rho().is_pure() ? extract_records_pure(hs, nullptr, opts) : extract_records_impure(hs, opts);
    s["status"] = "verified";
    s["error"] = nullptr;
  } catch (const Error& e) {
    // For mixed states a failed candidate proves nothing about other records.
    s["status"] = hs.rho().is_pure() ? "none" : "undetermined";
    s["error"] = e.what();
  }
  const ImplicationReport imp = implication_chain_report(hs, rs ? &*rs : nullptr, tolerance);
  ordered_json ij;
  ij["strong"] = imp.strong ? ordered_json(*imp.strong) : ordered_json(nullptr);
  ij["medium"] = imp.medium;
  ij["weak"] = imp.weak;
  ij["monotone"] = imp.monotone;
  ij["basis"] = imp.strong_basis;
  s["implication"] = ij;
  s["strong_residual"] = std::isnan(imp.strong_residual) ? ordered_json(nullptr) : ordered_json(imp.strong_residual);
  ordered_json list = ordered_json::array();
  if (rs) {
    const bool with_matrices = hs.dim() <= kRecordMatrixLimit;
    for (std::size_t i = 0; i < rs->projectors.size(); ++i) {
      ordered_json r;
      r["label"] = rs->labels[i];
      r["rank"] = rs->projectors[i].rank();
      r["matrix"] = with_matrices ? detail::matrix_json(rs->projectors[i].matrix()) : ordered_json(nullptr);
      list.push_back(std::move(r));
    }
    s["branch_residual"] = hs.rho().is_pure() ? ordered_json(rs->branch_residual) : ordered_json(nullptr);
    s["complement_owner"] = rs->labels[rs->complement_owner];
    s["complement_rank"] = rs->complement_rank;
  } else {
    s["branch_residual"] = nullptr;
    s["complement_owner"] = nullptr;
    s["complement_rank"] = nullptr;
  }
  s["records"] = list;
  try {
    const FullnessReport f = is_full(hs, tolerance);
    s["full"] = f.full;
  } catch (const Error&) {
    s["full"] = nullptr;
  }
  return s;
}

inline ordered_json classicality_section(const HistorySet& hs, const MaxentOptions& opts) {
  const ClassicalityReport r = classicality_report(hs, opts);
  ordered_json s;
  s["units"] = "nats";
  s["s_hat"] = r.s_hat;
  ordered_json q;
  q["labels"] = detail::strings_json(r.labels);
  q["values"] = detail::numbers_json(r.q_hat);
  q["sum"] = r.q_sum;
  s["q_hat"] = q;
  s["nonvanishing_chains"] = r.nonvanishing_chains;
  s["s_maxent"] = r.s_maxent;
  s["s_rho"] = r.s_rho;
  ordered_json sol;
  sol["method"] = std::string(to_string(r.solver.method));
  sol["iterations"] = r.solver.iterations;
  sol["max_iterations"] = opts.max_iterations;
  sol["final_residual"] = r.solver.final_residual;
  sol["tolerance"] = opts.tolerance;
  sol["converged"] = r.solver.converged;
  s["solver"] = sol;
  ordered_json c;
  c["before"] = r.constraints_before;
  c["after"] = r.constraints_after;
  s["constraints"] = c;
  return s;
}

struct RunResult {
  ordered_json report;
  int exit_code = ExitCode::ok;
};

// Runs the requested commands in dependency order.  Construction errors are
// thrown; solver non-convergence is flagged in the report and the exit code.
inline RunResult run_pipeline(const Config& config, const std::optional<std::string>& config_path) {
  const auto start = std::chrono::steady_clock::now();
  const HistorySet hs = config.history_set ? *config.history_set : build_model(*config.model, config.seed);
  std::set<std::string> wanted(config.commands.begin(), config.commands.end());
  if (wanted.count("records")) wanted.insert("decohere");

  RunResult out;
  ordered_json& rep = out.report;
  ordered_json meta;
  meta["tool"] = "dhist";
  meta["version"] = kVersion;
  meta["schema_version"] = kSchemaVersion;
  meta["eigen_version"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                          "." + std::to_string(EIGEN_MINOR_VERSION);
  ordered_json src;
  src["config"] = config_path ? ordered_json(*config_path) : ordered_json(nullptr);
  if (config.model) {
    ordered_json m;
    m["name"] = config.model->name;
    m["params"] = ordered_json::parse(config.model->params.dump());
    src["model"] = m;
  } else {
    src["model"] = nullptr;
  }
  meta["source"] = src;
  meta["seed"] = config.seed;
  ordered_json tj;
  tj["decoherence"] = config.tolerances.decoherence;
  tj["solver"] = config.tolerances.solver;
  tj["hermitian"] = tol::herm;
  tj["eigen"] = tol::eig;
  tj["zero"] = tol::zero;
  tj["rank_cutoff"] = tol::rank_cutoff;
  meta["tolerances"] = tj;
  ordered_json cmds = ordered_json::array();
  for (const auto& c : known_commands()) {
    if (wanted.count(c)) cmds.push_back(c);
  }
  meta["commands"] = cmds;
  meta["units"] = "nats";
  meta["timestamp"] = detail::utc_timestamp();
  meta["wall_time_s"] = 0.0;
  rep["meta"] = meta;

  if (wanted.count("validate")) rep["validate"] = validate_section(hs);
  if (wanted.count("decohere")) rep["decohere"] = decohere_section(hs, config.tolerances.decoherence);
  if (wanted.count("records")) rep["records"] = records_section(hs, config.tolerances.decoherence, config.complement);
  if (wanted.count("classicality")) {
    const MaxentOptions opts{config.tolerances.solver, config.max_iterations, config.solver};
    rep["classicality"] = classicality_section(hs, opts);
    if (!rep["classicality"]["solver"]["converged"].get<bool>()) out.exit_code = ExitCode::not_converged;
  }
  rep["meta"]["wall_time_s"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

// ------------------------------------------------------------ text tables

namespace detail {

inline std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

inline std::string pad(const std::string& s, std::size_t w) {
  return s.size() >= w ? s + " " : s + std::string(w - s.size(), ' ');
}

}  // namespace detail

inline std::string emit_text_tables(const ordered_json& report) {
  using detail::fmt;
  using detail::pad;
  std::ostringstream os;
  auto num = [](const ordered_json& j) { return j.is_null() ? std::string("-") : fmt(j.get<double>()); };
  if (report.contains("validate")) {
    const auto& v = report["validate"];
    os << "== validate ==\n";
    os << pad("dimension", 24) << v["dimension"].get<long long>() << "\n";
    os << pad("families", 24) << v["family_count"].get<long long>() << "\n";
    os << pad("histories", 24) << v["history_count"].get<long long>() << "\n";
    os << pad("initial state", 24) << (v["initial_state_pure"].get<bool>() ? "pure" : "mixed") << "\n";
    os << pad("sum C - 1", 24) << num(v["sum_identity_deviation"]) << "\n";
  }
  if (report.contains("decohere")) {
    const auto& d = report["decohere"];
    const auto& labels = d["labels"];
    std::size_t w = 12;
    for (const auto& l : labels) w = std::max(w, l.get<std::string>().size() + 2);
    os << "== decohere ==\n";
    os << "level " << d["level"].get<std::string>() << " at tol " << fmt(d["tolerance"].get<double>()) << "\n";
    os << "|D(a',a)|\n" << pad("", w);
    for (const auto& l : labels) os << pad(l.get<std::string>(), w);
    os << "\n";
    for (std::size_t i = 0; i < labels.size(); ++i) {
      os << pad(labels[i].get<std::string>(), w);
      for (std::size_t j = 0; j < labels.size(); ++j) {
        const auto& z = d["entries"][i][j];
        os << pad(fmt(std::hypot(z[0].get<double>(), z[1].get<double>())), w);
      }
      os << "\n";
    }
    os << pad("max |Re D| off-diag", 24) << fmt(d["max_weak_violation"].get<double>()) << "\n";
    os << pad("max |D| off-diag", 24) << fmt(d["max_medium_violation"].get<double>()) << "\n";
    os << pad("max normalized overlap", 24) << fmt(d["max_normalized_overlap"].get<double>()) << "\n";
    if (!d["probabilities"].is_null()) {
      os << pad("history", w) << "p\n";
      for (std::size_t i = 0; i < labels.size(); ++i) {
        os << pad(labels[i].get<std::string>(), w) << fmt(d["probabilities"]["values"][i].get<double>()) << "\n";
      }
    } else {
      os << "probabilities unavailable: " << d["probabilities_error"].get<std::string>() << "\n";
    }
  }
  if (report.contains("records")) {
    const auto& r = report["records"];
    const auto& imp = r["implication"];
    auto flag = [](const ordered_json& j) {
      return j.is_null() ? std::string("undetermined") : (j.get<bool>() ? std::string("yes") : std::string("no"));
    };
    os << "== records ==\n";
    os << pad("status", 24) << r["status"].get<std::string>() << "\n";
    os << pad("strong / medium / weak", 24) << flag(imp["strong"]) << " / " << flag(imp["medium"]) << " / "
       << flag(imp["weak"]) << "\n";
    os << pad("strong residual", 24) << num(r["strong_residual"]) << "\n";
    os << pad("full", 24) << flag(r["full"]) << "\n";
    for (const auto& rec : r["records"]) {
      os << pad(rec["label"].get<std::string>(), 24) << "rank " << rec["rank"].get<long long>() << "\n";
    }
  }
  if (report.contains("classicality")) {
    const auto& c = report["classicality"];
    os << "== classicality (nats) ==\n";
    os << pad("S_hat", 12) << pad("S_maxent", 12) << pad("S_rho", 12) << pad("residual", 12) << "iterations\n";
    os << pad(fmt(c["s_hat"].get<double>()), 12) << pad(fmt(c["s_maxent"].get<double>()), 12)
       << pad(fmt(c["s_rho"].get<double>()), 12) << pad(fmt(c["solver"]["final_residual"].get<double>()), 12)
       << c["solver"]["iterations"].get<long long>() << (c["solver"]["converged"].get<bool>() ? "" : " (not converged)")
       << "\n";
  }
  return os.str();
}

// ----------------------------------------------------------------- front end

struct Options {
  std::optional<std::string> config_path;
  std::optional<std::string> model;
  std::string params;
  std::optional<std::string> out_path;
  std::string format = "text";
  std::optional<double> tolerance;
  std::optional<double> solver_tolerance;
  std::optional<std::uint64_t> seed;
};

inline int run(const Options& opts, std::ostream& out, std::ostream& err) {
  try {
    Config config;
    if (opts.config_path) {
      std::ifstream in(*opts.config_path);
      if (!in) {
        err << "error: cannot read " << *opts.config_path << "\n";
        return ExitCode::io_error;
      }
      json j;
      try {
        j = json::parse(in);
      } catch (const json::parse_error& e) {
        err << "ParseError: " << *opts.config_path << ": " << e.what() << "\n";
        return ExitCode::io_error;
      }
      config = parse_config(j);
      if (opts.model) throw Error(Errc::parse_error, "--model cannot be combined with --config");
    } else if (opts.model) {
      config.model = ModelSpec{*opts.model, parse_params(opts.params)};
    } else {
      err << "error: give --config or --model\n";
      return ExitCode::io_error;
    }
    if (opts.tolerance) config.tolerances.decoherence = *opts.tolerance;
    if (opts.solver_tolerance) config.tolerances.solver = *opts.solver_tolerance;
    if (opts.seed) config.seed = *opts.seed;

    const RunResult result = run_pipeline(config, opts.config_path);
    if (opts.out_path) {
      std::ofstream f(*opts.out_path);
      if (!f) {
        err << "error: cannot write " << *opts.out_path << "\n";
        return ExitCode::io_error;
      }
      f << result.report.dump(2) << "\n";
    }
    if (opts.format == "json") {
      out << result.report.dump(2) << "\n";
    } else {
      out << emit_text_tables(result.report);
    }
    if (result.exit_code == ExitCode::not_converged) {
      err << "NotConverged: max-entropy solver stopped at residual "
          << result.report["classicality"]["solver"]["final_residual"].get<double>() << "\n";
    }
    return result.exit_code;
  } catch (const Error& e) {
    err << e.what() << "\n";
    if (e.code() == Errc::parse_error) return ExitCode::io_error;
    if (e.code() == Errc::not_converged) return ExitCode::not_converged;
    return ExitCode::validation_error;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return ExitCode::io_error;
  }
}

}  // namespace dhist::cli
