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

// decoherence.hpp: decoherence functional, axiom checks, classification,
// probabilities and sum rules.

#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dhist/history.hpp"

namespace dhist {

struct AxiomResiduals {
  double hermiticity = 0.0;    // max|D - D^dagger|
  double min_diagonal = 0.0;   // min Re D(a,a)
  double imag_diagonal = 0.0;  // max|Im D(a,a)|
  double normalization = 0.0;  // |sum D - 1|
};

struct DecoherenceMatrix {
  std::vector<std::string> labels;
  Matrix entries;  // entries(a', a) = D(a', a)
  double tolerance = tol::decoherence;
  AxiomResiduals axioms;
};

enum class DecoherencePath { automatic, dense, pure };

struct DecoherenceOptions {
  double tolerance = tol::decoherence;
  double axiom_tolerance = tol::herm;
  DecoherencePath path = DecoherencePath::automatic;
};

inline AxiomResiduals axiom_residuals(const Matrix& d) {
  AxiomResiduals r;
  r.hermiticity = detail::hermiticity_residual(d);
  r.min_diagonal = d.diagonal().real().minCoeff();
  r.imag_diagonal = d.diagonal().imag().cwiseAbs().maxCoeff();
  r.normalization = std::abs(d.sum() - cplx(1.0, 0.0));
  return r;
}

inline void assert_axioms(const AxiomResiduals& r, double tolerance) {
  if (r.hermiticity > tolerance) {
    throw Error(Errc::axiom_violation, "max|D - D^dagger| = " + std::to_string(r.hermiticity));
  }
  if (r.min_diagonal < -tolerance || r.imag_diagonal > tolerance) {
    throw Error(Errc::axiom_violation, "diagonal not real and nonnegative");
  }
  if (r.normalization > tolerance) {
    throw Error(Errc::axiom_violation, "|sum D - 1| = " + std::to_string(r.normalization));
  }
}

namespace detail {

// Gram matrix G(i, j) = <b_j|a_i>.
inline Matrix overlap_matrix(const std::vector<Vector>& a, const std::vector<Vector>& b) {
  Matrix g(static_cast<Index>(a.size()), static_cast<Index>(b.size()));
  for (std::size_t j = 0; j < b.size(); ++j) {
    for (std::size_t i = 0; i < a.size(); ++i) g(i, j) = b[j].dot(a[i]);
  }
  return g;
}

// Tr(A_i rho B_j^dagger)
inline Matrix dense_functional(const std::vector<Matrix>& a, const Matrix& rho,
                               const std::vector<Matrix>& b) {
  std::vector<Matrix> rb;
  rb.reserve(b.size());
  for (const Matrix& m : b) rb.push_back(rho * m.adjoint());
  Matrix d(static_cast<Index>(a.size()), static_cast<Index>(b.size()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) d(i, j) = trace_of_product(a[i], rb[j]);
  }
  return d;
}

}  // namespace detail

// Branch vectors C_a |psi> for pure rho, lexicographic order.
inline std::vector<Vector> branches(const HistorySet& hs) {
  if (!hs.rho().is_pure()) throw Error(Errc::impure_state, "branches need a pure initial state");
  return chain_apply_all(hs, hs.rho().pure_state()->amplitudes());
}

inline DecoherenceMatrix decoherence_matrix(const HistorySet& hs,
                                            const DecoherenceOptions& opts = {}) {
  DecoherencePath path = opts.path;
  if (path == DecoherencePath::automatic) {
    path = hs.rho().is_pure() ? DecoherencePath::pure : DecoherencePath::dense;
  }
  DecoherenceMatrix out;
  out.labels = hs.labels();
  out.tolerance = opts.tolerance;
  if (path == DecoherencePath::pure) {
    const auto b = branches(hs);
    out.entries = detail::overlap_matrix(b, b);
  } else {
    const auto chains = chain_operators(hs);
    out.entries = detail::dense_functional(chains, hs.rho().matrix(), chains);
  }
  out.axioms = axiom_residuals(out.entries);
  assert_axioms(out.axioms, opts.axiom_tolerance);
  return out;
}

inline DecoherenceMatrix decoherence_matrix(const ClassSet& cs, const DecoherenceOptions& opts = {}) {
  std::vector<Matrix> ops;
  for (const ClassOperator& c : cs.classes) {
    require_same_dim(cs.rho.dim(), c.matrix.dim(), "class set");
    ops.push_back(c.matrix.matrix());
  }
  DecoherenceMatrix out;
  out.labels = cs.labels;
  out.tolerance = opts.tolerance;
  out.entries = detail::dense_functional(ops, cs.rho.matrix(), ops);
  out.axioms = axiom_residuals(out.entries);
  assert_axioms(out.axioms, opts.axiom_tolerance);
  return out;
}

// Rectangular D(a' in A, a in B).  Not classified.
inline Matrix cross_set_decoherence(const HistorySet& a, const HistorySet& b,
                                    double tolerance = tol::herm) {
  require_same_dim(a.dim(), b.dim(), "cross_set_decoherence");
  if (a.t0() != b.t0() ||
      max_abs(Matrix(a.hamiltonian().matrix() - b.hamiltonian().matrix())) > tolerance ||
      max_abs(Matrix(a.rho().matrix() - b.rho().matrix())) > tolerance) {
    throw Error(Errc::invalid_history_set, "sets must share rho, H and t0");
  }
  if (a.rho().is_pure()) {
    const Vector& psi = a.rho().pure_state()->amplitudes();
    return detail::overlap_matrix(chain_apply_all(a, psi), chain_apply_all(b, psi));
  }
  return detail::dense_functional(chain_operators(a), a.rho().matrix(), chain_operators(b));
}

// --------------------------------------------------------- classification

enum class DecoherenceLevel { none, weak, medium };

constexpr std::string_view to_string(DecoherenceLevel l) noexcept {
  switch (l) {
    case DecoherenceLevel::none: return "none";
    case DecoherenceLevel::weak: return "weak";
    case DecoherenceLevel::medium: return "medium";
  }
  return "none";
}

struct DecoherenceReport {
  DecoherenceLevel level = DecoherenceLevel::none;
  double tolerance = tol::decoherence;
  double max_weak_violation = 0.0;    // max |Re D(a',a)|, a' != a
  double max_medium_violation = 0.0;  // max |D(a',a)|, a' != a
  RealMatrix normalized_overlaps;
  double max_normalized_overlap = 0.0;
};

// |D(a',a)| / sqrt(D(a',a') D(a,a)); zero when either diagonal is below tol::zero.
inline RealMatrix normalized_overlaps(const Matrix& d) {
  const Index n = d.rows();
  RealMatrix out = RealMatrix::Zero(n, n);
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i < n; ++i) {
      const double di = d(i, i).real(), dj = d(j, j).real();
      if (di < tol::zero || dj < tol::zero) continue;
      out(i, j) = std::abs(d(i, j)) / std::sqrt(di * dj);
    }
  }
  return out;
}

inline DecoherenceReport classify(const Matrix& d, double tolerance) {
  DecoherenceReport r;
  r.tolerance = tolerance;
  r.normalized_overlaps = normalized_overlaps(d);
  for (Index j = 0; j < d.cols(); ++j) {
    for (Index i = 0; i < d.rows(); ++i) {
      if (i == j) continue;
      r.max_weak_violation = std::max(r.max_weak_violation, std::abs(d(i, j).real()));
      r.max_medium_violation = std::max(r.max_medium_violation, std::abs(d(i, j)));
      r.max_normalized_overlap = std::max(r.max_normalized_overlap, r.normalized_overlaps(i, j));
    }
  }
  if (r.max_medium_violation <= tolerance) {
    r.level = DecoherenceLevel::medium;
  } else if (r.max_weak_violation <= tolerance) {
    r.level = DecoherenceLevel::weak;
  }
  return r;
}

inline DecoherenceReport classify(const DecoherenceMatrix& d) {
  return classify(d.entries, d.tolerance);
}

inline DecoherenceReport classify(const DecoherenceMatrix& d, double tolerance) {
  return classify(d.entries, tolerance);
}

struct ProbabilityTable {
  std::vector<std::string> labels;
  std::vector<double> p;
  double sum = 0.0;
};

inline ProbabilityTable probabilities(const DecoherenceMatrix& d) {
  const DecoherenceReport r = classify(d);
  if (r.level == DecoherenceLevel::none) {
    throw Error(Errc::not_decoherent, "max|Re D| off the diagonal is " +
                                          std::to_string(r.max_weak_violation));
  }
  ProbabilityTable t;
  t.labels = d.labels;
  for (Index i = 0; i < d.entries.rows(); ++i) {
    const double p = d.entries(i, i).real();
    if (p < -d.tolerance || p > 1.0 + d.tolerance) {
      throw Error(Errc::axiom_violation, "probability " + std::to_string(p) + " out of range");
    }
    t.p.push_back(p);
    t.sum += p;
  }
  if (std::abs(t.sum - 1.0) > d.tolerance) {
    throw Error(Errc::axiom_violation, "probabilities sum to " + std::to_string(t.sum));
  }
  return t;
}

// ---------------------------------------------------------------- sum rules

// Dbar(I, J) = sum over h' in I, h in J of D(h', h).
inline Matrix block_sums(const HistorySet& hs, const HistoryPartition& p, const Matrix& fine) {
  const Index n = static_cast<Index>(p.blocks.size());
  std::vector<std::vector<Index>> pos(p.blocks.size());
  for (std::size_t b = 0; b < p.blocks.size(); ++b) {
    for (const HistoryIndex& h : p.blocks[b]) pos[b].push_back(static_cast<Index>(hs.position(h)));
  }
  Matrix out = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      for (Index a : pos[i]) {
        for (Index b : pos[j]) out(i, j) += fine(a, b);
      }
    }
  }
  return out;
}

struct SumRuleReport {
  double superposition_deviation = 0.0;  // max|Dbar - block sums|
  DecoherenceLevel fine_level = DecoherenceLevel::none;
  DecoherenceLevel coarse_level = DecoherenceLevel::none;
  // Only evaluated when both sets decohere at least weakly.
  std::optional<double> probability_deviation;
  double tolerance = tol::decoherence;

  bool superposition_holds() const { return superposition_deviation <= tolerance; }
  std::optional<bool> sum_rule_holds() const {
    if (!probability_deviation) return std::nullopt;
    return *probability_deviation <= tolerance;
  }
};

namespace detail {

inline SumRuleReport compare_sum_rules(const Matrix& coarse, const Matrix& summed, const Matrix& fine,
                                       double tolerance) {
  SumRuleReport r;
  r.tolerance = tolerance;
  r.superposition_deviation = max_abs(Matrix(coarse - summed));
  r.fine_level = classify(fine, tolerance).level;
  r.coarse_level = classify(coarse, tolerance).level;
  if (r.fine_level != DecoherenceLevel::none && r.coarse_level != DecoherenceLevel::none) {
    // p(hbar) from the coarse D against block sums of fine p only.
    double dev = 0.0;
    for (Index i = 0; i < coarse.rows(); ++i) {
      dev = std::max(dev, std::abs(coarse(i, i).real() - summed(i, i).real()));
    }
    r.probability_deviation = dev;
  }
  return r;
}

}  // namespace detail

// Coarse D built from summed class operators, compared with block sums of fine D.
inline SumRuleReport check_sum_rules(const HistorySet& hs, const HistoryPartition& partition,
                                     double tolerance = tol::decoherence) {
  const Matrix fine = decoherence_matrix(hs).entries;
  const Matrix coarse = decoherence_matrix(coarse_grain(hs, partition)).entries;
  return detail::compare_sum_rules(coarse, block_sums(hs, partition, fine), fine, tolerance);
}

// Coarse D built from a coarse-grained history set (summed projectors).
inline SumRuleReport check_sum_rules(const HistorySet& hs, const std::vector<FamilyPartition>& parts,
                                     double tolerance = tol::decoherence) {
  const Matrix fine = decoherence_matrix(hs).entries;
  const Matrix coarse = decoherence_matrix(coarse_grain(hs, parts)).entries;
  return detail::compare_sum_rules(coarse, block_sums(hs, induced_partition(hs, parts), fine), fine,
                                   tolerance);
}

}  // namespace dhist
