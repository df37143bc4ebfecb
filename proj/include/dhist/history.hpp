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

// history.hpp: projector families scheduled in time, history sets, chain
// and class operators, coarse graining.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "dhist/operator.hpp"

namespace dhist {

// An exhaustive set of mutually exclusive projectors (Schrödinger picture)
// attached to a time.  Obtain one through make_family().
class ScheduledFamily {
 public:
  double time() const noexcept { return time_; }
  const std::vector<Projector>& projectors() const noexcept { return projectors_; }
  const std::vector<std::string>& labels() const noexcept { return labels_; }
  std::size_t size() const noexcept { return projectors_.size(); }
  Index dim() const noexcept { return projectors_.front().dim(); }

 private:
  ScheduledFamily(double time, std::vector<Projector> projectors, std::vector<std::string> labels)
      : time_(time), projectors_(std::move(projectors)), labels_(std::move(labels)) {}

  friend ScheduledFamily make_family(double, std::vector<Projector>, std::vector<std::string>,
                                     double);

  double time_;
  std::vector<Projector> projectors_;
  std::vector<std::string> labels_;
};

// Validates sum P = 1 and P_a P_b = delta_ab P_a.  Labels default to "0", "1", ...
inline ScheduledFamily make_family(double time, std::vector<Projector> projectors,
                                   std::vector<std::string> labels = {},
                                   double tolerance = tol::herm) {
  if (!std::isfinite(time)) throw Error(Errc::invalid_history_set, "family time is not finite");
  if (projectors.empty()) throw Error(Errc::completeness_violation, "empty projector family");
  const Index d = projectors.front().dim();
  for (const Projector& p : projectors) require_same_dim(d, p.dim(), "make_family");
  if (labels.empty()) {
    for (std::size_t i = 0; i < projectors.size(); ++i) labels.push_back(std::to_string(i));
  }
  if (labels.size() != projectors.size()) {
    throw Error(Errc::invalid_history_set, "label count does not match projector count");
  }
  if (std::set<std::string>(labels.begin(), labels.end()).size() != labels.size()) {
    throw Error(Errc::invalid_history_set, "duplicate labels in family");
  }
  for (std::size_t a = 0; a < projectors.size(); ++a) {
    for (std::size_t b = a + 1; b < projectors.size(); ++b) {
      const double r = detail::product_residual(projectors[a].matrix(), projectors[b].matrix(),
                                                nullptr);
      if (r > tolerance) {
        throw Error(Errc::exclusivity_violation, "projectors '" + labels[a] + "' and '" +
                                                     labels[b] + "' overlap: max|P_a P_b| = " +
                                                     std::to_string(r));
      }
    }
  }
  Matrix sum = -Matrix::Identity(d, d);
  for (const Projector& p : projectors) sum += p.matrix();
  const double dev = max_abs(sum);
  if (dev > tolerance) {
    throw Error(Errc::completeness_violation, "max|sum P - 1| = " + std::to_string(dev));
  }
  return ScheduledFamily(time, std::move(projectors), std::move(labels));
}

// One alternative per family, alphas[0] belonging to the earliest family.
struct HistoryIndex {
  std::vector<std::size_t> alphas;
  auto operator<=>(const HistoryIndex&) const = default;
};

class HistorySet {
 public:
  HistorySet(HermitianOperator hamiltonian, double t0, DensityMatrix rho,
             std::vector<ScheduledFamily> families, double tolerance = tol::herm)
      : hamiltonian_(std::move(hamiltonian)),
        t0_(t0),
        rho_(std::move(rho)),
        families_(std::move(families)) {
    const Index d = hamiltonian_.dim();
    require_same_dim(d, rho_.dim(), "history set: rho");
    if (!std::isfinite(t0_)) throw Error(Errc::invalid_history_set, "t0 is not finite");
    double previous = t0_;
    for (std::size_t k = 0; k < families_.size(); ++k) {
      require_same_dim(d, families_[k].dim(), "history set: family");
      if (families_[k].time() < previous) {
        throw Error(Errc::non_monotone_times,
                    "family " + std::to_string(k) + " at t=" + std::to_string(families_[k].time()) +
                        " precedes t=" + std::to_string(previous));
      }
      previous = families_[k].time();
    }
    // Simultaneous families must commute pairwise.
    for (std::size_t k = 0; k < families_.size(); ++k) {
      for (std::size_t l = k + 1; l < families_.size() && families_[l].time() == families_[k].time();
           ++l) {
        for (const Projector& p : families_[k].projectors()) {
          for (const Projector& q : families_[l].projectors()) {
            const double r = detail::commutator_residual(p.matrix(), q.matrix());
            if (r > tolerance) {
              throw Error(Errc::non_commuting_simultaneous,
                          "families " + std::to_string(k) + " and " + std::to_string(l) +
                              " share t=" + std::to_string(families_[k].time()) +
                              " but do not commute");
            }
          }
        }
      }
    }
    spectrum_ = std::make_shared<const Spectrum>(hamiltonian_);
  }

  const HermitianOperator& hamiltonian() const noexcept { return hamiltonian_; }
  double t0() const noexcept { return t0_; }
  const DensityMatrix& rho() const noexcept { return rho_; }
  const std::vector<ScheduledFamily>& families() const noexcept { return families_; }
  const Spectrum& spectrum() const noexcept { return *spectrum_; }
  Index dim() const noexcept { return hamiltonian_.dim(); }

  std::vector<double> times() const {
    std::vector<double> t;
    for (const auto& f : families_) t.push_back(f.time());
    return t;
  }

  std::size_t history_count() const {
    std::size_t n = 1;
    for (const auto& f : families_) n *= f.size();
    return n;
  }

  // All histories in lexicographic order of (alpha_1, ..., alpha_n).
  std::vector<HistoryIndex> histories() const {
    std::vector<HistoryIndex> out;
    out.reserve(history_count());
    HistoryIndex cur{std::vector<std::size_t>(families_.size(), 0)};
    for (std::size_t h = 0; h < history_count(); ++h) {
      out.push_back(cur);
      for (std::size_t k = families_.size(); k-- > 0;) {
        if (++cur.alphas[k] < families_[k].size()) break;
        cur.alphas[k] = 0;
      }
    }
    return out;
  }

  void check_index(const HistoryIndex& idx) const {
    if (idx.alphas.size() != families_.size()) {
      throw Error(Errc::invalid_index, "history index has " + std::to_string(idx.alphas.size()) +
                                           " entries for " + std::to_string(families_.size()) +
                                           " families");
    }
    for (std::size_t k = 0; k < families_.size(); ++k) {
      if (idx.alphas[k] >= families_[k].size()) {
        throw Error(Errc::invalid_index, "alternative " + std::to_string(idx.alphas[k]) +
                                             " out of range for family " + std::to_string(k));
      }
    }
  }

  // Lexicographic position of a history.
  std::size_t position(const HistoryIndex& idx) const {
    check_index(idx);
    std::size_t pos = 0;
    for (std::size_t k = 0; k < families_.size(); ++k) pos = pos * families_[k].size() + idx.alphas[k];
    return pos;
  }

  std::string label(const HistoryIndex& idx) const {
    check_index(idx);
    std::string s = "(";
    for (std::size_t k = 0; k < families_.size(); ++k) {
      if (k) s += ",";
      s += families_[k].labels()[idx.alphas[k]];
    }
    return s + ")";
  }

  std::vector<std::string> labels() const {
    std::vector<std::string> out;
    for (const auto& h : histories()) out.push_back(label(h));
    return out;
  }

 private:
  HermitianOperator hamiltonian_;
  double t0_;
  DensityMatrix rho_;
  std::vector<ScheduledFamily> families_;
  std::shared_ptr<const Spectrum> spectrum_;
};

// A (possibly coarse-grained) history: matrix = sum of member chains.
struct ClassOperator {
  Operator matrix;
  std::vector<HistoryIndex> members;
};

// Class operators sharing an initial state; rows of a generalized D.
struct ClassSet {
  DensityMatrix rho;
  std::vector<ClassOperator> classes;
  std::vector<std::string> labels;
};

inline Projector heisenberg_projector(const HistorySet& hs, std::size_t k, std::size_t alpha) {
  const ScheduledFamily& f = hs.families().at(k);
  return to_heisenberg(f.projectors().at(alpha), hs.spectrum(), f.time(), hs.t0());
}

inline std::vector<std::vector<Matrix>> heisenberg_families(const HistorySet& hs) {
  std::vector<std::vector<Matrix>> out;
  for (std::size_t k = 0; k < hs.families().size(); ++k) {
    const ScheduledFamily& f = hs.families()[k];
    std::vector<Matrix> fam;
    for (const Projector& p : f.projectors()) {
      fam.push_back(hs.spectrum().conjugate(-(f.time() - hs.t0()), p.matrix()));
    }
    out.push_back(std::move(fam));
  }
  return out;
}

// C_alpha = P^n_{alpha_n}(t_n) ... P^1_{alpha_1}(t_1), latest time leftmost.
inline ClassOperator chain_operator(const HistorySet& hs, const HistoryIndex& idx) {
  hs.check_index(idx);
  Matrix c = Matrix::Identity(hs.dim(), hs.dim());
  for (std::size_t k = 0; k < idx.alphas.size(); ++k) {
    c = heisenberg_projector(hs, k, idx.alphas[k]).matrix() * c;
  }
  return ClassOperator{Operator(std::move(c)), {idx}};
}

// All chain operators in lexicographic history order, sharing prefixes.
inline std::vector<Matrix> chain_operators(const HistorySet& hs) {
  const auto heis = heisenberg_families(hs);
  std::vector<Matrix> out;
  out.reserve(hs.history_count());
  std::function<void(std::size_t, const Matrix&)> walk = [&](std::size_t k, const Matrix& prefix) {
    if (k == heis.size()) {
      out.push_back(prefix);
      return;
    }
    for (const Matrix& p : heis[k]) walk(k + 1, p * prefix);
  };
  walk(0, Matrix::Identity(hs.dim(), hs.dim()));
  return out;
}

// C_alpha v for every history, in lexicographic order, evaluated by
// propagating v in the Schrödinger picture and projecting at each time.
inline std::vector<Vector> chain_apply_all(const HistorySet& hs, const Vector& v) {
  require_same_dim(hs.dim(), v.size(), "chain_apply_all");
  const auto& fams = hs.families();
  const Spectrum& sp = hs.spectrum();
  std::vector<Vector> out;
  out.reserve(hs.history_count());
  std::function<void(std::size_t, double, const Vector&)> walk = [&](std::size_t k, double t,
                                                                     const Vector& state) {
    if (k == fams.size()) {
      out.push_back(sp.evolve(hs.t0() - t, state));
      return;
    }
    const Vector moved = sp.evolve(fams[k].time() - t, state);
    for (const Projector& p : fams[k].projectors()) walk(k + 1, fams[k].time(), p.matrix() * moved);
  };
  walk(0, hs.t0(), v);
  return out;
}

struct IdentityCheck {
  double max_deviation;
};

// max|sum C - 1| over an explicit list of chains.
inline IdentityCheck sum_identity_check(const std::vector<Matrix>& chains, Index d) {
  Matrix sum = -Matrix::Identity(d, d);
  for (const Matrix& c : chains) sum += c;
  return {max_abs(sum)};
}

inline IdentityCheck sum_identity_check(const HistorySet& hs) {
  return sum_identity_check(chain_operators(hs), hs.dim());
}

// ---------------------------------------------------------- coarse graining

// Grouping of one family's alternatives; each block becomes one summed projector.
struct FamilyPartition {
  std::vector<std::vector<std::size_t>> blocks;
  std::vector<std::string> labels;  // optional, one per block
};

// Grouping of whole histories into classes.
struct HistoryPartition {
  std::vector<std::vector<HistoryIndex>> blocks;
};

inline void validate_family_partition(const FamilyPartition& p, std::size_t n) {
  std::vector<int> seen(n, 0);
  for (const auto& block : p.blocks) {
    if (block.empty()) throw Error(Errc::invalid_partition, "empty block");
    for (std::size_t a : block) {
      if (a >= n) throw Error(Errc::invalid_partition, "alternative out of range");
      if (seen[a]++) throw Error(Errc::invalid_partition, "alternative in two blocks");
    }
  }
  if (std::find(seen.begin(), seen.end(), 0) != seen.end()) {
    throw Error(Errc::invalid_partition, "blocks do not cover the family");
  }
  if (!p.labels.empty() && p.labels.size() != p.blocks.size()) {
    throw Error(Errc::invalid_partition, "label count does not match block count");
  }
}

inline FamilyPartition singleton_family_partition(std::size_t n) {
  FamilyPartition p;
  for (std::size_t a = 0; a < n; ++a) p.blocks.push_back({a});
  return p;
}

inline FamilyPartition merged_family_partition(std::size_t n, std::string label = "*") {
  FamilyPartition p;
  p.blocks.emplace_back();
  for (std::size_t a = 0; a < n; ++a) p.blocks.back().push_back(a);
  p.labels = {std::move(label)};
  return p;
}

// Family-level coarse graining: one partition per family.  The result is
// again a projector-chain history set.
inline HistorySet coarse_grain(const HistorySet& hs, const std::vector<FamilyPartition>& parts) {
  if (parts.size() != hs.families().size()) {
    throw Error(Errc::invalid_partition, "need one partition per family");
  }
  std::vector<ScheduledFamily> fams;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const ScheduledFamily& f = hs.families()[k];
    validate_family_partition(parts[k], f.size());
    std::vector<Projector> projectors;
    std::vector<std::string> labels;
    for (std::size_t b = 0; b < parts[k].blocks.size(); ++b) {
      Matrix sum = Matrix::Zero(hs.dim(), hs.dim());
      std::string joined;
      for (std::size_t a : parts[k].blocks[b]) {
        sum += f.projectors()[a].matrix();
        joined += (joined.empty() ? "" : "|") + f.labels()[a];
      }
      projectors.emplace_back(std::move(sum));
      labels.push_back(parts[k].labels.empty() ? joined : parts[k].labels[b]);
    }
    fams.push_back(make_family(f.time(), std::move(projectors), std::move(labels)));
  }
  return HistorySet(hs.hamiltonian(), hs.t0(), hs.rho(), std::move(fams));
}

// The history-level partition induced by per-family partitions, with blocks
// in the lexicographic order of the coarse-grained set.
inline HistoryPartition induced_partition(const HistorySet& hs,
                                          const std::vector<FamilyPartition>& parts) {
  if (parts.size() != hs.families().size()) {
    throw Error(Errc::invalid_partition, "need one partition per family");
  }
  std::vector<std::vector<std::size_t>> block_of(parts.size());
  std::size_t coarse_count = 1;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    validate_family_partition(parts[k], hs.families()[k].size());
    block_of[k].resize(hs.families()[k].size());
    for (std::size_t b = 0; b < parts[k].blocks.size(); ++b) {
      for (std::size_t a : parts[k].blocks[b]) block_of[k][a] = b;
    }
    coarse_count *= parts[k].blocks.size();
  }
  HistoryPartition out;
  out.blocks.resize(coarse_count);
  for (const HistoryIndex& h : hs.histories()) {
    std::size_t pos = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
      pos = pos * parts[k].blocks.size() + block_of[k][h.alphas[k]];
    }
    out.blocks[pos].push_back(h);
  }
  return out;
}

inline HistoryPartition singleton_partition(const HistorySet& hs) {
  HistoryPartition p;
  for (const auto& h : hs.histories()) p.blocks.push_back({h});
  return p;
}

inline HistoryPartition merge_all_partition(const HistorySet& hs) {
  return HistoryPartition{{hs.histories()}};
}

inline void validate_history_partition(const HistorySet& hs, const HistoryPartition& p) {
  std::vector<int> seen(hs.history_count(), 0);
  for (const auto& block : p.blocks) {
    if (block.empty()) throw Error(Errc::invalid_partition, "empty block");
    for (const HistoryIndex& h : block) {
      if (seen[hs.position(h)]++) throw Error(Errc::invalid_partition, "history in two blocks");
    }
  }
  if (std::find(seen.begin(), seen.end(), 0) != seen.end()) {
    throw Error(Errc::invalid_partition, "blocks do not cover the history set");
  }
}

// History-level coarse graining into class operators.
inline ClassSet coarse_grain(const HistorySet& hs, const HistoryPartition& partition) {
  validate_history_partition(hs, partition);
  const auto chains = chain_operators(hs);
  ClassSet out{hs.rho(), {}, {}};
  for (const auto& block : partition.blocks) {
    Matrix sum = Matrix::Zero(hs.dim(), hs.dim());
    std::string label = "{";
    for (std::size_t i = 0; i < block.size(); ++i) {
      sum += chains[hs.position(block[i])];
      label += (i ? " " : "") + hs.label(block[i]);
    }
    out.classes.push_back(ClassOperator{Operator(std::move(sum)), block});
    out.labels.push_back(label + "}");
  }
  return out;
}

// Every family of `coarse` sits at a time carrying a family of `fine` whose
// projectors sum to each of its projectors.
inline bool is_coarse_graining_of(const HistorySet& coarse, const HistorySet& fine,
                                  double tolerance = tol::herm) {
  if (coarse.dim() != fine.dim()) return false;
  if (std::abs(coarse.t0() - fine.t0()) > 0.0) return false;
  if (max_abs(Matrix(coarse.hamiltonian().matrix() - fine.hamiltonian().matrix())) > tolerance) return false;
  if (max_abs(Matrix(coarse.rho().matrix() - fine.rho().matrix())) > tolerance) return false;

  auto is_sum_of = [&](const Projector& p, const ScheduledFamily& g) {
    Matrix sum = Matrix::Zero(p.dim(), p.dim());
    for (const Projector& q : g.projectors()) {
      // Exclusive, exhaustive q's: q is inside p iff Tr(p q) = Tr(q).
      const double rank = q.matrix().trace().real();
      if (rank <= 0.5) continue;
      const double overlap = detail::trace_of_product(p.matrix(), q.matrix()).real();
      if (overlap > 0.5 * rank) sum += q.matrix();
    }
    return max_abs(Matrix(sum - p.matrix())) <= tolerance;
  };
  for (const ScheduledFamily& f : coarse.families()) {
    bool found = false;
    for (const ScheduledFamily& g : fine.families()) {
      if (g.time() != f.time()) continue;
      if (std::all_of(f.projectors().begin(), f.projectors().end(),
                      [&](const Projector& p) { return is_sum_of(p, g); })) {
        found = true;
        break;
      }
    }
    if (!found) return false;
  }
  return true;
}

enum class ReassignMode {
  keep_schrodinger,  // same Schrödinger projectors at the new times
  keep_heisenberg,   // same Heisenberg projectors, now labelled by the new times
};

inline HistorySet reassign_times(const HistorySet& hs, const std::vector<double>& new_times,
                                 ReassignMode mode = ReassignMode::keep_schrodinger) {
  if (new_times.size() != hs.families().size()) {
    throw Error(Errc::non_monotone_times, "expected " + std::to_string(hs.families().size()) +
                                              " times, got " + std::to_string(new_times.size()));
  }
  for (std::size_t k = 1; k < new_times.size(); ++k) {
    if (new_times[k] < new_times[k - 1]) {
      throw Error(Errc::non_monotone_times, "times must be nondecreasing");
    }
  }
  std::vector<ScheduledFamily> fams;
  for (std::size_t k = 0; k < new_times.size(); ++k) {
    const ScheduledFamily& f = hs.families()[k];
    std::vector<Projector> projectors;
    for (const Projector& p : f.projectors()) {
      if (mode == ReassignMode::keep_schrodinger) {
        projectors.push_back(p);
      } else {
        projectors.emplace_back(hs.spectrum().conjugate(new_times[k] - f.time(), p.matrix()));
      }
    }
    fams.push_back(make_family(new_times[k], std::move(projectors), f.labels()));
  }
  return HistorySet(hs.hamiltonian(), hs.t0(), hs.rho(), std::move(fams));
}

}  // namespace dhist
