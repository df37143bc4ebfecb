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

// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "dhist/cli.hpp"
#include "dhist/dhist.hpp"
#include "oracles.hpp"
#include "support.hpp"

namespace {

using namespace dhist;

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Accumulates named checks; the first failure is kept for the report line.
class Tally {
 public:
  void check(bool ok, const std::string& what) {
    ++checks_;
    if (!ok && first_failure_.empty()) first_failure_ = what;
    if (!ok) ++failures_;
  }
  void note(const std::string& s) { notes_ += (notes_.empty() ? "" : "; ") + s; }
  Outcome outcome() const {
    std::ostringstream os;
    os << checks_ << " checks";
    if (failures_) os << ", " << failures_ << " failed, first: " << first_failure_;
    if (!notes_.empty()) os << "; " << notes_;
    return {failures_ == 0, os.str()};
  }

 private:
  std::size_t checks_ = 0, failures_ = 0;
  std::string first_failure_, notes_;
};

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

std::vector<oracle::Family> oracle_families(const HistorySet& hs) {
  std::vector<oracle::Family> out;
  for (const ScheduledFamily& f : hs.families()) {
    oracle::Family of{f.time(), {}};
    for (const Projector& p : f.projectors()) of.projectors.push_back(p.matrix());
    out.push_back(of);
  }
  return out;
}

oracle::Mat oracle_functional(const HistorySet& hs) {
  return oracle::decoherence(oracle_families(hs), hs.hamiltonian().matrix(), hs.t0(), hs.rho().matrix());
}

// Heisenberg projectors drawn as groupings of one basis, so all commute.
support::RandomCase commuting_case(oracle::Gen& g, Index d, std::size_t n_times, int state) {
  support::RandomCase c;
  c.h = g.hermitian(d);
  c.pure = state == 0;
  if (state == 0) {
    c.psi = g.unit(d);
    c.rho = c.psi * c.psi.adjoint();
  } else if (state == 1) {
    c.rho = g.density(d, false);
  } else {
    c.rho = oracle::Mat::Identity(d, d) / static_cast<double>(d);
  }
  const oracle::Mat basis = g.unitary(d);
  double t = 0.0;
  for (std::size_t k = 0; k < n_times; ++k) {
    t += 0.2 + g.uniform();
    const std::size_t groups = 1 + g.below(static_cast<std::size_t>(d));
    std::vector<oracle::Mat> ps(groups, oracle::Mat::Zero(d, d));
    for (Index i = 0; i < d; ++i) {
      const std::size_t b = static_cast<std::size_t>(i) < groups ? static_cast<std::size_t>(i) : g.below(groups);
      ps[b] += basis.col(i) * basis.col(i).adjoint();
    }
    const oracle::Mat u = oracle::propagator(c.h, t);
    for (auto& p : ps) p = u * p * u.adjoint();
    c.families.push_back({t, ps});
  }
  return c;
}

std::vector<FamilyPartition> merge_one(const HistorySet& hs, std::size_t k) {
  std::vector<FamilyPartition> parts;
  for (std::size_t i = 0; i < hs.families().size(); ++i) {
    const std::size_t n = hs.families()[i].size();
    parts.push_back(i == k ? merged_family_partition(n) : singleton_family_partition(n));
  }
  return parts;
}

// The random models of criterion 1, reused as the common test matrix.
std::vector<HistorySet> random_models(std::size_t count) {
  std::vector<HistorySet> out;
  for (std::size_t s = 0; s < count; ++s) {
    const Index d = 2 + static_cast<Index>(s % 15);
    out.push_back(random_model(1000 + s, d, 1 + s % 3).history_set);
  }
  return out;
}

// ---------------------------------------------------------------- criteria

Outcome criterion_axioms() {
  const auto start = std::chrono::steady_clock::now();
  Tally t;
  double worst_herm = 0.0, worst_diag = 0.0, worst_norm = 0.0, worst_oracle = 0.0;
  for (const HistorySet& hs : random_models(200)) {
    const Matrix d = decoherence_matrix(hs).entries;
    worst_herm = std::max(worst_herm, max_abs(Matrix(d - d.adjoint())));
    worst_diag = std::min(worst_diag, d.diagonal().real().minCoeff());
    worst_norm = std::max(worst_norm, std::abs(d.sum() - cplx(1.0, 0.0)));
    worst_oracle = std::max(worst_oracle, oracle::max_abs(d - oracle_functional(hs)));
  }
  const double elapsed = seconds_since(start);
  t.check(worst_herm <= 1e-10, "hermiticity " + num(worst_herm));
  t.check(worst_diag >= -1e-10, "min diagonal " + num(worst_diag));
  t.check(worst_norm <= 1e-9, "normalization " + num(worst_norm));
  t.check(worst_oracle <= 1e-10, "oracle agreement " + num(worst_oracle));
  t.check(elapsed <= 60.0, "runtime " + num(elapsed) + " s");
  t.note("200 models, herm " + num(worst_herm) + ", norm " + num(worst_norm) + ", " + num(elapsed) + " s");
  return t.outcome();
}

Outcome criterion_superposition() {
  Tally t;
  oracle::Gen g(11);
  double worst = 0.0;
  std::size_t partitions = 0, non_decoherent = 0;
  for (const HistorySet& hs : random_models(200)) {
    const Matrix fine = decoherence_matrix(hs).entries;
    non_decoherent += classify(fine, tol::decoherence).level == DecoherenceLevel::none;
    const auto hist = hs.histories();
    for (int trial = 0; trial < 3; ++trial) {
      HistoryPartition p;
      const std::size_t nb = 1 + g.below(hist.size());
      p.blocks.resize(nb);
      for (std::size_t i = 0; i < hist.size(); ++i) p.blocks[i < nb ? i : g.below(nb)].push_back(hist[i]);
      const Matrix coarse = decoherence_matrix(coarse_grain(hs, p)).entries;
      worst = std::max(worst, max_abs(Matrix(coarse - block_sums(hs, p, fine))));
      ++partitions;
    }
    for (std::size_t k = 0; k < hs.families().size(); ++k) {
      worst = std::max(worst, check_sum_rules(hs, merge_one(hs, k)).superposition_deviation);
      ++partitions;
    }
  }
  t.check(worst <= 1e-10, "block-sum deviation " + num(worst));
  t.note(std::to_string(partitions) + " partitions, " + std::to_string(non_decoherent) +
         " models not decoherent, max deviation " + num(worst));
  return t.outcome();
}

Outcome criterion_sum_rules() {
  Tally t;
  double worst = 0.0;
  const std::vector<std::pair<cplx, cplx>> amps = {
      {1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0)}, {0.6, cplx(0.0, 0.8)}, {cplx(0.28, 0.96), 0.0}, {0.1, 0.99498743710662}};
  for (const auto& [a, b] : amps) {
    const HistorySet hs = measurement_model(a, b).history_set;
    const std::vector<double> fine = probabilities(decoherence_matrix(hs)).p;
    for (std::size_t k = 0; k < 2; ++k) {
      const std::vector<double> coarse = probabilities(decoherence_matrix(coarse_grain(hs, merge_one(hs, k)))).p;
      // Oracle: sum the fine table over the merged family's index.
      for (std::size_t keep = 0; keep < 2; ++keep) {
        double s = 0.0;
        for (std::size_t m = 0; m < 2; ++m) s += fine[k == 0 ? m * 2 + keep : keep * 2 + m];
        worst = std::max(worst, std::abs(coarse[keep] - s));
      }
      const SumRuleReport r = check_sum_rules(hs, merge_one(hs, k));
      t.check(r.probability_deviation.has_value() && *r.probability_deviation <= 1e-10, "library sum rule");
    }
  }
  t.check(worst <= 1e-10, "merged probability deviation " + num(worst));
  t.note("max deviation " + num(worst));
  return t.outcome();
}

Outcome criterion_implication() {
  Tally t;
  std::size_t models = 0, strong = 0, medium = 0, weak = 0;
  auto visit = [&](const HistorySet& hs, const std::string& name) {
    const ImplicationReport r = implication_chain_report(hs);
    ++models;
    if (r.strong.value_or(false)) {
      ++strong;
      t.check(r.medium, name + ": strong without medium");
    }
    if (r.medium) {
      ++medium;
      t.check(r.weak, name + ": medium without weak");
    }
    weak += r.weak;
    t.check(r.monotone, name + ": report not monotone");
  };
  std::size_t i = 0;
  for (const HistorySet& hs : random_models(200)) visit(hs, "random " + std::to_string(i++));
  oracle::Gen g(44);
  for (int n = 0; n < 150; ++n) {
    visit(support::build(commuting_case(g, 2 + static_cast<Index>(g.below(5)), 1 + g.below(3), n % 3)),
          "commuting " + std::to_string(n));
  }
  visit(measurement_model(0.6, cplx(0.0, 0.8)).history_set, "measurement");
  visit(measurement_model(1.0, 0.0).history_set, "measurement (1,0)");
  for (int n = 0; n <= 6; ++n) visit(environment_model(n, oracle::kPi / 4).history_set, "environment");
  for (const char* axes : {"z", "zz", "zx", "zxz", "xyz"}) {
    for (const char* state : {"0", "+", "+i"}) {
      visit(qubit_sequence(axes, pauli::x(), DensityMatrix::from_state(qubit_state(state)), 0.7), axes);
    }
    visit(qubit_sequence(axes, Matrix::Zero(2, 2), DensityMatrix::maximally_mixed(2), 1.0), axes);
  }
  t.note(std::to_string(models) + " models: " + std::to_string(strong) + " strong, " + std::to_string(medium) +
         " medium, " + std::to_string(weak) + " weak");
  return t.outcome();
}

Outcome criterion_measurement() {
  Tally t;
  double worst = 0.0, comm_p = 0.0, comm_q = 0.0;
  for (const auto& [a, b] : std::vector<std::pair<cplx, cplx>>{{0.6, cplx(0.0, 0.8)}, {1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0)}}) {
    const ModelBundle m = measurement_model(a, b);
    const HistorySet& hs = m.history_set;
    const Matrix& rho = hs.rho().matrix();
    for (std::size_t s = 0; s < 2; ++s) {
      for (std::size_t x = 0; x < 2; ++x) {
        const oracle::Mat p1 = oracle::heisenberg(hs.families()[0].projectors()[s].matrix(), hs.hamiltonian().matrix(),
                                                  hs.families()[0].time() - hs.t0());
        const oracle::Mat p2 = oracle::heisenberg(hs.families()[1].projectors()[x].matrix(), hs.hamiltonian().matrix(),
                                                  hs.families()[1].time() - hs.t0());
        const Matrix& q1 = m.operators.at("Q1_" + std::to_string(s));
        const Matrix& q2 = m.operators.at("Q2_" + std::to_string(x));
        worst = std::max(worst, oracle::max_abs(p2 * p1 * rho - q2 * q1 * rho));
        comm_p = std::max(comm_p, (p2 * p1 - p1 * p2).norm());
        comm_q = std::max(comm_q, max_abs(Matrix(q2 * q1 - q1 * q2)));
      }
    }
  }
  t.check(worst <= 1e-10, "P2 P1 rho vs Q2 Q1 rho " + num(worst));
  t.check(comm_p >= 0.1, "P commutator " + num(comm_p));
  t.check(comm_q <= 1e-12, "Q commutator " + num(comm_q));
  t.note("max|PPrho-QQrho| " + num(worst) + ", ||[P2,P1]|| " + num(comm_p) + ", |[Q2,Q1]| " + num(comm_q));
  return t.outcome();
}

// Heuristic candidate records on a mixed state; failure to build counts as failure to verify.
std::optional<double> impure_strong_residual(const HistorySet& hs) {
  try {
    const RecordSet rs = extract_records_impure(hs);
    return check_strong(hs, rs).residual;
  } catch (const Error&) {
    return std::nullopt;
  }
}

Outcome criterion_ind_pathology() {
  Tally t;
  const DensityMatrix ind = DensityMatrix::maximally_mixed(2);
  for (const char* axes : {"zx", "xz", "zy", "zxz"}) {
    const auto r = impure_strong_residual(qubit_sequence(axes, Matrix::Zero(2, 2), ind, 1.0));
    t.check(!r || *r > tol::decoherence, std::string("non-commuting ") + axes + " verified");
  }
  oracle::Gen g(66);
  for (int n = 0; n < 20; ++n) {
    const Index d = 2 + static_cast<Index>(g.below(3));
    const std::vector<oracle::Family> fams = {{1.0, g.family(d, 2)}, {2.0, g.family(d, 2)}};
    const HistorySet hs = support::make_set(fams, g.hermitian(d), 0.0, oracle::Mat::Identity(d, d) / double(d));
    const auto r = impure_strong_residual(hs);
    t.check(!r || *r > tol::decoherence, "random non-commuting case " + std::to_string(n) + " verified");
  }
  double worst = 0.0;
  for (const char* axes : {"z", "zz", "xx"}) {
    const auto r = impure_strong_residual(qubit_sequence(axes, Matrix::Zero(2, 2), ind, 1.0));
    t.check(r.has_value(), std::string("commuting ") + axes + " produced no records");
    if (r) worst = std::max(worst, *r);
  }
  for (int n = 0; n < 20; ++n) {
    const auto r = impure_strong_residual(support::build(commuting_case(g, 2 + static_cast<Index>(g.below(4)), 2, 2)));
    t.check(r.has_value(), "commuting random case produced no records");
    if (r) worst = std::max(worst, *r);
  }
  t.check(worst <= 1e-10, "commuting residual " + num(worst));
  t.note("commuting residual " + num(worst));
  return t.outcome();
}

Outcome criterion_records() {
  Tally t;
  oracle::Gen g(77);
  double algebra = 0.0, record_eq = 0.0, refine_dev = 0.0, repeat_dev = 0.0;
  std::vector<std::pair<HistorySet, std::vector<oracle::Mat>>> pure_sets;
  for (int n = 0; n < 60; ++n) {
    const auto c = commuting_case(g, 2 + static_cast<Index>(g.below(6)), 1 + g.below(3), 0);
    pure_sets.emplace_back(support::build(c), oracle::chains(c.families, c.h, 0.0));
  }
  {
    const HistorySet hs = measurement_model(0.6, cplx(0.0, 0.8)).history_set;
    pure_sets.emplace_back(hs, oracle::chains(oracle_families(hs), hs.hamiltonian().matrix(), hs.t0()));
  }
  for (const auto& [hs, chains] : pure_sets) {
    const Index d = hs.dim();
    const RecordSet rs = extract_records_pure(hs);
    const Vector& psi = hs.rho().pure_state()->amplitudes();
    Matrix sum = Matrix::Zero(d, d);
    for (std::size_t a = 0; a < rs.projectors.size(); ++a) {
      const Matrix& ra = rs.projectors[a].matrix();
      sum += ra;
      for (std::size_t b = a + 1; b < rs.projectors.size(); ++b) {
        algebra = std::max(algebra, max_abs(Matrix(ra * rs.projectors[b].matrix())));
      }
      record_eq = std::max(record_eq, ((chains[a] - ra) * psi).norm());
    }
    algebra = std::max(algebra, max_abs(Matrix(sum - Matrix::Identity(d, d))));

    const HistorySet full = refine_to_full(hs);
    t.check(is_full(full).full, "refined set not full");
    const Matrix merged = decoherence_matrix(coarse_grain(full, merge_one(full, full.families().size() - 1))).entries;
    const std::vector<double> p0 = probabilities(decoherence_matrix(hs)).p;
    for (std::size_t i = 0; i < p0.size(); ++i) {
      refine_dev = std::max(refine_dev, std::abs(merged(static_cast<Index>(i), static_cast<Index>(i)).real() - p0[i]));
    }
  }
  for (const HistorySet& hs : random_models(200)) {
    if (hs.families().size() < 2) continue;
    const double t1 = hs.families().front().time(), tn = hs.families().back().time();
    const HistorySet more = interpolate_repeat(hs, 0.5 * (t1 + tn));
    std::size_t inserted = 0;
    for (std::size_t k = 1; k < more.families().size(); ++k) {
      if (more.families()[k].time() == 0.5 * (t1 + tn)) inserted = k;
    }
    const Matrix merged = decoherence_matrix(coarse_grain(more, merge_one(more, inserted))).entries;
    repeat_dev = std::max(repeat_dev, max_abs(Matrix(merged - decoherence_matrix(hs).entries)));
  }
  t.check(algebra <= 1e-9, "exhaustive/exclusive " + num(algebra));
  t.check(record_eq <= 1e-9, "record equation " + num(record_eq));
  t.check(refine_dev <= 1e-10, "refined coarse probabilities " + num(refine_dev));
  t.check(repeat_dev <= 1e-12, "repeat invariance " + num(repeat_dev));
  t.note("algebra " + num(algebra) + ", |(C-R)psi| " + num(record_eq) + ", refine " + num(refine_dev) + ", repeat " +
         num(repeat_dev));
  return t.outcome();
}

Outcome criterion_formal_entropy() {
  Tally t;
  double worst_sum = 0.0;
  auto visit = [&](const HistorySet& hs) {
    double s = 0.0;
    for (double q : formal_probabilities(hs)) s += q;
    worst_sum = std::max(worst_sum, std::abs(s - 1.0));
  };
  for (const HistorySet& hs : random_models(200)) visit(hs);
  visit(measurement_model(0.6, cplx(0.0, 0.8)).history_set);
  for (int n = 0; n <= 6; ++n) visit(environment_model(n, 1.0).history_set);
  for (const char* axes : {"z", "zz", "zxz", "xyzx"}) visit(qubit_sequence(axes, pauli::y(), DensityMatrix::maximally_mixed(2), 0.3));
  const DensityMatrix ind = DensityMatrix::maximally_mixed(2);
  const double zxz = s_hat(qubit_sequence("zxz", Matrix::Zero(2, 2), ind, 1.0));
  const double zz = s_hat(qubit_sequence("zz", Matrix::Zero(2, 2), ind, 1.0));
  t.check(worst_sum <= 1e-10, "sum of q " + num(worst_sum));
  t.check(std::abs(zxz - 3.0 * std::log(2.0)) <= 1e-10, "z-x-z S_hat " + num(zxz));
  t.check(std::abs(zz - std::log(2.0)) <= 1e-10, "z-z S_hat " + num(zz));
  t.note("max |sum q - 1| " + num(worst_sum) + ", S_hat(zxz) = " + num(zxz) + ", S_hat(zz) = " + num(zz));
  return t.outcome();
}

Outcome criterion_maxent() {
  Tally t;
  {
    const Vector plus = oracle::ket({1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0)});
    const HistorySet hs =
        support::make_pure_set({{1.0, {oracle::pz(0), oracle::pz(1)}}}, Matrix::Zero(2, 2), 0.0, plus);
    const MaxentResult r = maxent(build_constraints(hs));
    t.check(max_abs(Matrix(r.rho.matrix() - Matrix::Identity(2, 2) / 2.0)) <= 1e-6, "rho~ != I/2");
    t.check(std::abs(r.entropy - std::log(2.0)) <= 1e-6, "|+> z entropy " + num(r.entropy));
  }
  oracle::Gen g(99);
  for (Index d = 2; d <= 16; d += 2) {
    const HistorySet hs = support::make_pure_set({{1.0, {oracle::Mat::Identity(d, d)}}}, g.hermitian(d), 0.0, g.unit(d));
    const MaxentResult r = maxent(build_constraints(hs));
    t.check(std::abs(r.entropy - std::log(double(d))) <= 1e-8, "normalization-only d=" + std::to_string(d));
  }
  double worst_gap = 1e300, worst_residual = 0.0;
  std::size_t worst_iterations = 0, models = 0;
  auto visit = [&](const HistorySet& hs, const std::string& name) {
    const ClassicalityReport r = classicality_report(hs);
    ++models;
    t.check(r.solver.converged, name + " did not converge");
    worst_gap = std::min(worst_gap, r.s_maxent - r.s_rho);
    worst_residual = std::max(worst_residual, r.solver.final_residual);
    worst_iterations = std::max(worst_iterations, r.solver.iterations);
  };
  std::size_t i = 0;
  for (const HistorySet& hs : random_models(60)) visit(hs, "random " + std::to_string(i++));
  visit(measurement_model(0.6, cplx(0.0, 0.8)).history_set, "measurement");
  for (const char* axes : {"z", "zz", "zxz", "xyz"}) {
    visit(qubit_sequence(axes, pauli::x(), DensityMatrix::from_state(qubit_state("+")), 0.4), axes);
  }
  t.check(worst_gap >= -1e-6, "S(rho~) - S(rho) " + num(worst_gap));
  t.check(worst_residual <= 1e-8, "solver residual " + num(worst_residual));
  t.check(worst_iterations <= 10000, "iterations " + std::to_string(worst_iterations));
  t.note(std::to_string(models) + " models, min S gap " + num(worst_gap) + ", max residual " + num(worst_residual) +
         ", max iterations " + std::to_string(worst_iterations));
  return t.outcome();
}

Outcome criterion_environment() {
  const auto start = std::chrono::steady_clock::now();
  Tally t;
  double worst = 0.0;
  for (double theta : {oracle::kPi / 8, oracle::kPi / 4, oracle::kPi}) {
    double previous = 2.0;
    for (int n = 0; n <= 10; ++n) {
      const DecoherenceReport r = classify(decoherence_matrix(environment_model(n, theta).history_set));
      const double expected = std::pow(std::abs(std::cos(theta / 2.0)), n);
      worst = std::max(worst, std::abs(r.max_normalized_overlap - expected));
      t.check(r.max_normalized_overlap <= previous + 1e-12, "not monotone at n_env=" + std::to_string(n));
      previous = r.max_normalized_overlap;
    }
  }
  const double elapsed = seconds_since(start);
  t.check(worst <= 1e-9, "overlap vs |cos(theta/2)|^n " + num(worst));
  t.check(elapsed <= 120.0, "runtime " + num(elapsed) + " s");
  t.note("max deviation " + num(worst) + ", " + num(elapsed) + " s through n_env=10 (d=2048)");
  return t.outcome();
}

std::string run_capture(const std::string& command) {
  std::string out;
  std::array<char, 4096> buf{};
  FILE* pipe = popen(command.c_str(), "r");
  if (!pipe) return out;
  while (std::size_t n = std::fread(buf.data(), 1, buf.size(), pipe)) out.append(buf.data(), n);
  const int status = pclose(pipe);
  if (status != 0) out += "\n<exit " + std::to_string(status) + ">";
  return out;
}

std::string strip_clock(const std::string& text) {
  auto j = cli::ordered_json::parse(text);
  j["meta"].erase("timestamp");
  j["meta"].erase("wall_time_s");
  return j.dump(2);
}

Outcome criterion_cli() {
  Tally t;
  const std::string cli_path = DHIST_CLI_PATH, root = DHIST_SOURCE_DIR;
  const auto dir = std::filesystem::temp_directory_path() / "dhist_acceptance";
  std::filesystem::create_directories(dir);
  struct Run {
    std::string name, args;
  };
  const std::vector<Run> runs = {
      {"trivial", "--config " + root + "/samples/trivial.json"},
      {"qubit_zxz", "--config " + root + "/samples/qubit_zxz.json"},
      {"measurement", "--config " + root + "/samples/measurement.json"},
      {"environment", "--config " + root + "/samples/environment.json"},
      {"two_qubit", "--config " + root + "/samples/two_qubit_pauli.json"},
      {"random", "--model random --param dim=6,n_times=3 --seed 17"},
      {"qubit_model", "--model qubit --param axes=zyx,state=+i,hamiltonian=x,dt=0.3"},
  };
  std::vector<std::string> reports;
  for (const Run& r : runs) {
    std::string texts[2];
    for (int k = 0; k < 2; ++k) {
      const std::string out = (dir / (r.name + "_" + std::to_string(k) + ".json")).string();
      run_capture(cli_path + " " + r.args + " --format text --out " + out + " > /dev/null 2>&1");
      std::ifstream in(out);
      std::stringstream ss;
      ss << in.rdbuf();
      texts[k] = ss.str();
      reports.push_back(out);
    }
    bool same = false;
    try {
      same = !texts[0].empty() && strip_clock(texts[0]) == strip_clock(texts[1]);
    } catch (const std::exception&) {
      same = false;
    }
    t.check(same, r.name + " reports differ");
  }
  std::string cmd = "python3 " + root + "/tools/validate_json.py " + root + "/schema/report.schema.json";
  for (const auto& r : reports) cmd += " " + r;
  const std::string result = run_capture(cmd + " 2>&1");
  t.check(result.find("<exit") == std::string::npos, "schema validation: " + result.substr(0, 300));
  t.note(std::to_string(runs.size()) + " configs run twice, " + std::to_string(reports.size()) +
         " reports schema-checked");
  return t.outcome();
}

}  // namespace

int main() {
  const std::vector<std::function<Outcome()>> criteria = {
      criterion_axioms,      criterion_superposition, criterion_sum_rules,     criterion_implication,
      criterion_measurement, criterion_ind_pathology, criterion_records,       criterion_formal_entropy,
      criterion_maxent,      criterion_environment,   criterion_cli,
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i]();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << "criterion " << i + 1 << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail << std::endl;
  }
  return failed ? EXIT_FAILURE : EXIT_SUCCESS;
}
