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

// records.hpp: branch vectors, record projectors, strong decoherence,
// fullness and refinement.

#pragma once

#include <cmath>
#include <complex>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dhist/decoherence.hpp"

namespace dhist {

struct BranchSet {
  std::vector<HistoryIndex> indices;
  std::vector<std::string> labels;
  std::vector<Vector> vectors;  // C_a |psi>, unnormalized
  std::vector<double> weights;  // squared norms
  double completeness_deviation = 0.0;  // max|sum_a b_a - psi|
  double max_overlap = 0.0;             // max |<b_a|b_b>| over a != b
  bool orthogonal = false;              // max_overlap <= tolerance
  double tolerance = tol::decoherence;

  bool vanishing(std::size_t i) const { return weights[i] < tol::zero; }
  std::size_t nonvanishing_count() const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) n += !vanishing(i);
    return n;
  }
};

namespace detail {

inline const StateVector& require_pure(const HistorySet& hs, const StateVector* psi) {
  if (psi != nullptr) {
    require_same_dim(hs.dim(), psi->dim(), "state");
    const Vector& v = psi->amplitudes();
    const double fidelity = v.dot(hs.rho().matrix() * v).real();
    if (std::abs(fidelity - 1.0) > tol::herm) {
      throw Error(Errc::impure_state, "rho is not |psi><psi| for the given psi");
    }
    return *psi;
  }
  if (!hs.rho().is_pure()) throw Error(Errc::impure_state, "initial state is mixed");
  return *hs.rho().pure_state();
}

// Modified Gram-Schmidt, applied twice.  Returns the residual of v against `basis`.
inline Vector orthogonal_residual(const std::vector<Vector>& basis, Vector v) {
  for (int pass = 0; pass < 2; ++pass) {
    for (const Vector& u : basis) v -= u * u.dot(v);
  }
  return v;
}

// Completes an orthonormal list with standard basis vectors in index order.
inline std::vector<Vector> complete_with_standard_basis(const std::vector<Vector>& basis, Index d,
                                                        double tolerance = 1e-8) {
  std::vector<Vector> all = basis;
  std::vector<Vector> added;
  for (Index i = 0; i < d && static_cast<Index>(all.size()) < d; ++i) {
    Vector e = Vector::Zero(d);
    e(i) = 1.0;
    Vector r = orthogonal_residual(all, e);
    const double n = r.norm();
    if (n <= tolerance) continue;
    all.push_back(r / n);
    added.push_back(r / n);
  }
  return added;
}

// Exactly orthonormal versions of (nearly orthogonal) vectors, in order.
inline std::vector<Vector> orthonormalize(const std::vector<Vector>& vs) {
  std::vector<Vector> out;
  for (const Vector& v : vs) {
    Vector r = orthogonal_residual(out, v);
    out.push_back(r / r.norm());
  }
  return out;
}

}  // namespace detail

inline BranchSet branch_vectors(const HistorySet& hs, const StateVector* psi = nullptr,
                                double tolerance = tol::decoherence) {
  const StateVector& state = detail::require_pure(hs, psi);
  BranchSet b;
  b.tolerance = tolerance;
  b.indices = hs.histories();
  b.labels = hs.labels();
  b.vectors = chain_apply_all(hs, state.amplitudes());
  Vector sum = -state.amplitudes();
  for (const Vector& v : b.vectors) {
    b.weights.push_back(v.squaredNorm());
    sum += v;
  }
  b.completeness_deviation = max_abs(sum);
  for (std::size_t i = 0; i < b.vectors.size(); ++i) {
    for (std::size_t j = i + 1; j < b.vectors.size(); ++j) {
      b.max_overlap = std::max(b.max_overlap, std::abs(b.vectors[i].dot(b.vectors[j])));
    }
  }
  b.orthogonal = b.max_overlap <= tolerance;
  return b;
}

inline BranchSet branch_vectors(const HistorySet& hs, const StateVector& psi,
                                double tolerance = tol::decoherence) {
  return branch_vectors(hs, &psi, tolerance);
}

// ------------------------------------------------------------------ records

enum class ComplementPolicy {
  to_vanishing,  // first vanishing history, else first history
  to_first,      // always the first history
};

constexpr std::string_view to_string(ComplementPolicy p) noexcept {
  return p == ComplementPolicy::to_vanishing ? "to-vanishing" : "to-first";
}

struct RecordSet {
  std::vector<HistoryIndex> indices;
  std::vector<std::string> labels;
  std::vector<Projector> projectors;
  ComplementPolicy policy = ComplementPolicy::to_vanishing;
  std::size_t complement_owner = 0;  // position that received the complement
  Index complement_rank = 0;
  double branch_residual = 0.0;      // max ||(C_a - R_a)|psi>||, pure case only
};

struct RecordOptions {
  double tolerance = tol::decoherence;
  ComplementPolicy policy = ComplementPolicy::to_vanishing;
};

namespace detail {

inline std::size_t complement_owner(const std::vector<bool>& vanishing, ComplementPolicy policy) {
  if (policy == ComplementPolicy::to_vanishing) {
    for (std::size_t i = 0; i < vanishing.size(); ++i) {
      if (vanishing[i]) return i;
    }
  }
  return 0;
}

inline void check_record_algebra(const std::vector<Projector>& rs, double tolerance) {
  const Index d = rs.front().dim();
  Matrix sum = -Matrix::Identity(d, d);
  for (const Projector& r : rs) sum += r.matrix();
  if (max_abs(sum) > tolerance) {
    throw Error(Errc::verification_failed, "records are not exhaustive");
  }
  for (std::size_t i = 0; i < rs.size(); ++i) {
    for (std::size_t j = i + 1; j < rs.size(); ++j) {
      if (rs[i].rank() == 0 || rs[j].rank() == 0) continue;
      if (product_residual(rs[i].matrix(), rs[j].matrix(), nullptr) > tolerance) {
        throw Error(Errc::verification_failed, "records are not exclusive");
      }
    }
  }
}

}  // namespace detail

inline RecordSet extract_records_pure(const HistorySet& hs, const StateVector* psi = nullptr,
                                      const RecordOptions& opts = {}) {
  const BranchSet b = branch_vectors(hs, psi, opts.tolerance);
  if (!b.orthogonal) {
    throw Error(Errc::not_medium_decoherent,
                "branches overlap: max|<b|b'>| = " + std::to_string(b.max_overlap));
  }
  const Index d = hs.dim();
  std::vector<bool> vanishing;
  std::vector<Vector> raw;
  for (std::size_t i = 0; i < b.vectors.size(); ++i) {
    vanishing.push_back(b.vanishing(i));
    if (!b.vanishing(i)) raw.push_back(b.vectors[i]);
  }
  const std::vector<Vector> unit = detail::orthonormalize(raw);

  RecordSet rs;
  rs.indices = b.indices;
  rs.labels = b.labels;
  rs.policy = opts.policy;
  rs.complement_owner = detail::complement_owner(vanishing, opts.policy);
  rs.complement_rank = d - static_cast<Index>(unit.size());
  Matrix complement = Matrix::Identity(d, d);
  for (const Vector& v : unit) complement -= v * v.adjoint();

  std::size_t k = 0;
  const Vector& state = detail::require_pure(hs, psi).amplitudes();
  for (std::size_t i = 0; i < b.vectors.size(); ++i) {
    Matrix r = Matrix::Zero(d, d);
    if (!vanishing[i]) {
      r = unit[k] * unit[k].adjoint();
      ++k;
    }
    if (i == rs.complement_owner) r += complement;
    rs.projectors.emplace_back(std::move(r));
    const double residual = (b.vectors[i] - rs.projectors.back().matrix() * state).norm();
    rs.branch_residual = std::max(rs.branch_residual, residual);
  }
  detail::check_record_algebra(rs.projectors, tol::herm);
  // Re-orthonormalizing branches that overlap by at most tol moves them by
  // about tol / |b|.
  double min_norm = 1.0;
  for (std::size_t i = 0; i < b.weights.size(); ++i) {
    if (!vanishing[i]) min_norm = std::min(min_norm, std::sqrt(b.weights[i]));
  }
  const double bound = std::max(tol::herm, 4.0 * opts.tolerance / min_norm);
  if (rs.branch_residual > bound) {
    throw Error(Errc::verification_failed,
                "max|(C - R)psi| = " + std::to_string(rs.branch_residual));
  }
  return rs;
}

struct StrongReport {
  std::vector<double> residuals;  // ||C_a rho - R_a rho||_max per history
  double residual = 0.0;
  double tolerance = tol::decoherence;
  bool strong = false;
};

inline StrongReport check_strong(const HistorySet& hs, const RecordSet& records,
                                 double tolerance = tol::decoherence) {
  if (records.projectors.size() != hs.history_count()) {
    throw Error(Errc::invalid_index, "record count does not match history count");
  }
  StrongReport r;
  r.tolerance = tolerance;
  if (hs.rho().is_pure()) {
    // C rho - R rho = (C - R)|psi><psi|, so the max entry factorizes.
    const Vector& psi = hs.rho().pure_state()->amplitudes();
    const double psi_max = max_abs(psi);
    const auto b = chain_apply_all(hs, psi);
    for (std::size_t i = 0; i < b.size(); ++i) {
      r.residuals.push_back(max_abs(Vector(b[i] - records.projectors[i].matrix() * psi)) * psi_max);
    }
  } else {
    const auto chains = chain_operators(hs);
    const Matrix& rho = hs.rho().matrix();
    for (std::size_t i = 0; i < chains.size(); ++i) {
      r.residuals.push_back(max_abs(Matrix((chains[i] - records.projectors[i].matrix()) * rho)));
    }
  }
  for (double x : r.residuals) r.residual = std::max(r.residual, x);
  r.strong = r.residual <= tolerance;
  return r;
}

// Candidate records from the column spans of C_a rho.  Returns only verified records.
inline RecordSet extract_records_impure(const HistorySet& hs, const RecordOptions& opts = {}) {
  const Index d = hs.dim();
  const auto chains = chain_operators(hs);
  const Matrix& rho = hs.rho().matrix();

  std::vector<Eigen::JacobiSVD<Matrix>> svds;
  double scale = 0.0;
  std::vector<Matrix> products;
  for (const Matrix& c : chains) {
    products.push_back(c * rho);
    svds.emplace_back(products.back(), Eigen::ComputeThinU);
    if (svds.back().singularValues().size() > 0) {
      scale = std::max(scale, svds.back().singularValues()(0));
    }
  }
  const double cutoff = std::max(tol::rank_cutoff * scale, tol::zero);
  std::vector<Matrix> spans;
  std::vector<bool> vanishing;
  for (std::size_t i = 0; i < svds.size(); ++i) {
    const auto& s = svds[i].singularValues();
    Index r = 0;
    while (r < s.size() && s(r) > cutoff) ++r;
    spans.push_back(svds[i].matrixU().leftCols(r));
    vanishing.push_back(r == 0);
  }
  for (std::size_t i = 0; i < spans.size(); ++i) {
    for (std::size_t j = i + 1; j < spans.size(); ++j) {
      if (spans[i].cols() == 0 || spans[j].cols() == 0) continue;
      const double o = max_abs(Matrix(spans[i].adjoint() * spans[j]));
      if (o > opts.tolerance) {
        throw Error(Errc::subspaces_not_orthogonal,
                    "ranges of C rho for " + hs.label(hs.histories()[i]) + " and " +
                        hs.label(hs.histories()[j]) + " overlap by " + std::to_string(o));
      }
    }
  }
  // Exactly orthonormal span bases, in history order.
  std::vector<Vector> basis;
  std::vector<std::vector<Vector>> per(spans.size());
  for (std::size_t i = 0; i < spans.size(); ++i) {
    for (Index c = 0; c < spans[i].cols(); ++c) {
      Vector r = detail::orthogonal_residual(basis, spans[i].col(c));
      r /= r.norm();
      basis.push_back(r);
      per[i].push_back(r);
    }
  }
  Matrix complement = Matrix::Identity(d, d);
  for (const Vector& v : basis) complement -= v * v.adjoint();

  RecordSet rs;
  rs.indices = hs.histories();
  rs.labels = hs.labels();
  rs.policy = opts.policy;
  rs.complement_owner = detail::complement_owner(vanishing, opts.policy);
  rs.complement_rank = d - static_cast<Index>(basis.size());
  for (std::size_t i = 0; i < spans.size(); ++i) {
    Matrix r = Matrix::Zero(d, d);
    for (const Vector& v : per[i]) r += v * v.adjoint();
    if (i == rs.complement_owner) r += complement;
    rs.projectors.emplace_back(std::move(r));
  }
  detail::check_record_algebra(rs.projectors, tol::herm);
  const StrongReport check = check_strong(hs, rs, opts.tolerance);
  if (!check.strong) {
    throw Error(Errc::verification_failed,
                "max|C rho - R rho| = " + std::to_string(check.residual));
  }
  return rs;
}

// ------------------------------------------------------ implication chain

struct ImplicationReport {
  std::optional<bool> strong;  // nullopt: undetermined
  bool medium = false;
  bool weak = false;
  double strong_residual = std::numeric_limits<double>::quiet_NaN();
  std::string strong_basis;  // how the strong flag was decided
  bool monotone = true;      // strong => medium => weak on the flags above
};

inline ImplicationReport implication_chain_report(const HistorySet& hs,
                                                  const RecordSet* records = nullptr,
                                                  double tolerance = tol::decoherence) {
  ImplicationReport r;
  const DecoherenceReport c = classify(decoherence_matrix(hs).entries, tolerance);
  r.medium = c.level == DecoherenceLevel::medium;
  r.weak = c.level != DecoherenceLevel::none;
  RecordOptions opts{tolerance, ComplementPolicy::to_vanishing};
  auto evaluate = [&](const RecordSet& rs) {
    const StrongReport s = check_strong(hs, rs, tolerance);
    r.strong = s.strong;
    r.strong_residual = s.residual;
  };
  if (records != nullptr) {
    evaluate(*records);
    r.strong_basis = "given records";
  } else if (hs.rho().is_pure()) {
    // Records exist iff the branches are orthogonal.
    const BranchSet b = branch_vectors(hs, nullptr, tolerance);
    if (!b.orthogonal) {
      r.strong = false;
      r.strong_basis = "branches not orthogonal";
    } else {
      try {
        evaluate(extract_records_pure(hs, nullptr, opts));
        r.strong_basis = "branch records";
      } catch (const Error&) {
        r.strong_basis = "branch records failed verification";
      }
    }
  } else {
    try {
      evaluate(extract_records_impure(hs, opts));
      r.strong_basis = "range records";
    } catch (const Error& e) {
      r.strong_basis = std::string("undetermined: ") + std::string(to_string(e.code()));
    }
  }
  r.monotone = !(r.strong.value_or(false) && !r.medium) && !(r.medium && !r.weak);
  return r;
}

// ------------------------------------------------------------------ fullness

// A basis of rank-one projectors; order and phases are irrelevant.
struct EquivalenceClassKey {
  std::vector<Projector> basis;
};

struct FullnessReport {
  bool full = false;
  std::size_t nonvanishing = 0;
  std::optional<EquivalenceClassKey> key;
};

inline FullnessReport is_full(const HistorySet& hs, double tolerance = tol::decoherence) {
  FullnessReport f;
  if (hs.rho().is_pure()) {
    const BranchSet b = branch_vectors(hs, nullptr, tolerance);
    if (!b.orthogonal) {
      throw Error(Errc::not_strongly_decoherent,
                  "branches overlap: max|<b|b'>| = " + std::to_string(b.max_overlap));
    }
    f.nonvanishing = b.nonvanishing_count();
    f.full = static_cast<Index>(f.nonvanishing) == hs.dim();
    if (f.full) {
      EquivalenceClassKey key;
      for (std::size_t i = 0; i < b.vectors.size(); ++i) {
        if (!b.vanishing(i)) key.basis.push_back(Projector::onto(b.vectors[i]));
      }
      f.key = std::move(key);
    }
    return f;
  }
  RecordSet rs;
  try {
    rs = extract_records_impure(hs, RecordOptions{tolerance, ComplementPolicy::to_vanishing});
  } catch (const Error& e) {
    throw Error(Errc::not_strongly_decoherent, std::string("no verified records: ") + e.what());
  }
  EquivalenceClassKey key;
  bool rank_ok = true;
  for (const Projector& p : rs.projectors) {
    if (p.rank() == 1) {
      key.basis.push_back(p);
    } else if (p.rank() != 0) {
      rank_ok = false;
    }
  }
  f.nonvanishing = key.basis.size();
  f.full = rank_ok && static_cast<Index>(key.basis.size()) == hs.dim();
  if (f.full) f.key = std::move(key);
  return f;
}

// Greedy matching of rank-one projectors by Frobenius distance.
inline bool same_equivalence_class(const EquivalenceClassKey& a, const EquivalenceClassKey& b,
                                   double tolerance = 1e-8) {
  if (a.basis.size() != b.basis.size()) return false;
  if (!a.basis.empty()) require_same_dim(a.basis.front().dim(), b.basis.front().dim(), "keys");
  std::vector<bool> used(b.basis.size(), false);
  for (const Projector& p : a.basis) {
    bool matched = false;
    for (std::size_t j = 0; j < b.basis.size(); ++j) {
      if (used[j]) continue;
      if ((p.matrix() - b.basis[j].matrix()).norm() < tolerance) {
        used[j] = matched = true;
        break;
      }
    }
    if (!matched) return false;
  }
  return true;
}

namespace detail {

// A rank-one family from Heisenberg-picture vectors, scheduled at `time`.
inline ScheduledFamily heisenberg_rank_one_family(const HistorySet& hs, const std::vector<Vector>& vs,
                                                  double time, const std::string& prefix) {
  std::vector<Projector> ps;
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < vs.size(); ++i) {
    const Matrix heis = vs[i] * vs[i].adjoint();
    ps.emplace_back(hs.spectrum().conjugate(time - hs.t0(), heis));
    labels.push_back(prefix + std::to_string(i));
  }
  return make_family(time, std::move(ps), std::move(labels));
}

inline bool commutes_with_families_at(const HistorySet& hs, const ScheduledFamily& f, double time) {
  for (const ScheduledFamily& g : hs.families()) {
    if (g.time() != time) continue;
    for (const Projector& p : f.projectors()) {
      for (const Projector& q : g.projectors()) {
        if (commutator_residual(p.matrix(), q.matrix()) > tol::herm) return false;
      }
    }
  }
  return true;
}

}  // namespace detail

// Appends a rank-one family that splits every nonvanishing branch group so the
// result has dim nonvanishing, orthogonal branches.
inline HistorySet refine_to_full(const HistorySet& hs, double tolerance = tol::decoherence) {
  const BranchSet b = branch_vectors(hs, nullptr, tolerance);
  if (!b.orthogonal) {
    throw Error(Errc::not_medium_decoherent,
                "branches overlap: max|<b|b'>| = " + std::to_string(b.max_overlap));
  }
  const Index d = hs.dim();
  std::vector<Vector> raw;
  for (std::size_t i = 0; i < b.vectors.size(); ++i) {
    if (!b.vanishing(i)) raw.push_back(b.vectors[i]);
  }
  const std::vector<Vector> unit = detail::orthonormalize(raw);
  const std::vector<Vector> rest = detail::complete_with_standard_basis(unit, d);

  // The first branch and the completion vectors are mixed by a discrete
  // Fourier matrix so every new vector has a nonzero component on the branch.
  std::vector<Vector> group{unit.front()};
  group.insert(group.end(), rest.begin(), rest.end());
  const std::size_t k = group.size();
  const double two_pi = 2.0 * std::acos(-1.0);
  std::vector<Vector> basis;
  for (std::size_t i = 0; i < k; ++i) {
    Vector e = Vector::Zero(d);
    for (std::size_t j = 0; j < k; ++j) {
      e += std::polar(1.0 / std::sqrt(static_cast<double>(k)),
                      two_pi * static_cast<double>(i * j) / static_cast<double>(k)) *
           group[j];
    }
    basis.push_back(e);
  }
  basis.insert(basis.end(), unit.begin() + 1, unit.end());

  const double last = hs.families().empty() ? hs.t0() : hs.families().back().time();
  ScheduledFamily appended = detail::heisenberg_rank_one_family(hs, basis, last, "r");
  if (!detail::commutes_with_families_at(hs, appended, last)) {
    appended = detail::heisenberg_rank_one_family(hs, basis, last + 1.0, "r");
  }
  std::vector<ScheduledFamily> fams = hs.families();
  fams.push_back(std::move(appended));
  return HistorySet(hs.hamiltonian(), hs.t0(), hs.rho(), std::move(fams));
}

// ----------------------------------------------------------- interpolation

// Inserts at t_new a copy (in the Heisenberg sense) of the latest family at or
// before t_new.
inline HistorySet interpolate_repeat(const HistorySet& hs, double t_new) {
  const auto& fams = hs.families();
  if (fams.empty() || t_new < fams.front().time() || t_new > fams.back().time()) {
    throw Error(Errc::time_out_of_range, "t_new must lie within the family times");
  }
  std::size_t k = 0;
  for (std::size_t i = 0; i < fams.size(); ++i) {
    if (fams[i].time() <= t_new) k = i;
  }
  const ScheduledFamily& f = fams[k];
  std::vector<Projector> ps;
  for (const Projector& p : f.projectors()) {
    ps.emplace_back(hs.spectrum().conjugate(t_new - f.time(), p.matrix()));
  }
  std::vector<ScheduledFamily> out(fams.begin(), fams.begin() + static_cast<long>(k) + 1);
  out.push_back(make_family(t_new, std::move(ps), f.labels()));
  out.insert(out.end(), fams.begin() + static_cast<long>(k) + 1, fams.end());
  return HistorySet(hs.hamiltonian(), hs.t0(), hs.rho(), std::move(out));
}

// Inserts after the first `k` families a rank-one family containing the
// normalized resolved vectors P^k ... P^1 |psi>, completed to a basis.
inline HistorySet interpolate_resolution(const HistorySet& hs, double t_new, std::size_t k,
                                         double tolerance = tol::decoherence) {
  const auto& fams = hs.families();
  if (k > fams.size()) throw Error(Errc::invalid_index, "k exceeds the family count");
  const double lo = k == 0 ? hs.t0() : fams[k - 1].time();
  const double hi = k == fams.size() ? std::numeric_limits<double>::infinity() : fams[k].time();
  if (t_new < lo || t_new > hi) {
    throw Error(Errc::time_out_of_range, "t_new must lie between the neighbouring family times");
  }
  const BranchSet full = branch_vectors(hs, nullptr, tolerance);
  if (!full.orthogonal) {
    throw Error(Errc::not_medium_decoherent,
                "branches overlap: max|<b|b'>| = " + std::to_string(full.max_overlap));
  }
  const HistorySet prefix(hs.hamiltonian(), hs.t0(), hs.rho(),
                          std::vector<ScheduledFamily>(fams.begin(), fams.begin() + static_cast<long>(k)));
  const BranchSet resolved = branch_vectors(prefix, nullptr, tolerance);
  if (!resolved.orthogonal) {
    throw Error(Errc::not_medium_decoherent, "resolved vectors are not orthogonal");
  }
  std::vector<Vector> raw;
  for (std::size_t i = 0; i < resolved.vectors.size(); ++i) {
    if (!resolved.vanishing(i)) raw.push_back(resolved.vectors[i]);
  }
  std::vector<Vector> basis = detail::orthonormalize(raw);
  const std::vector<Vector> rest = detail::complete_with_standard_basis(basis, hs.dim());
  basis.insert(basis.end(), rest.begin(), rest.end());

  std::vector<ScheduledFamily> out(fams.begin(), fams.begin() + static_cast<long>(k));
  out.push_back(detail::heisenberg_rank_one_family(hs, basis, t_new, "v"));
  out.insert(out.end(), fams.begin() + static_cast<long>(k), fams.end());
  return HistorySet(hs.hamiltonian(), hs.t0(), hs.rho(), std::move(out));
}

}  // namespace dhist
