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

// classicality.hpp: Schrödinger chains, formal probabilities, their entropy
// and the constrained maximum-entropy state.

#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "dhist/history.hpp"

namespace dhist {

// Schrödinger picture of the Heisenberg projector P^k_alpha(t_k).
inline Projector schrodinger_projector(const HistorySet& hs, std::size_t k, std::size_t alpha) {
  const ScheduledFamily& f = hs.families().at(k);
  return to_schrodinger(heisenberg_projector(hs, k, alpha), hs.spectrum(), f.time(), hs.t0());
}

struct SchrodingerChain {
  Operator matrix;
  HistoryIndex index;
};

inline SchrodingerChain schrodinger_chain(const HistorySet& hs, const HistoryIndex& idx) {
  hs.check_index(idx);
  Matrix c = Matrix::Identity(hs.dim(), hs.dim());
  for (std::size_t k = 0; k < idx.alphas.size(); ++k) {
    c = hs.families()[k].projectors()[idx.alphas[k]].matrix() * c;
  }
  return SchrodingerChain{Operator(std::move(c)), idx};
}

// All Schrödinger chains in lexicographic order, sharing prefixes.
inline std::vector<Matrix> schrodinger_chains(const HistorySet& hs) {
  const auto& fams = hs.families();
  std::vector<Matrix> out;
  out.reserve(hs.history_count());
  std::function<void(std::size_t, const Matrix&)> walk = [&](std::size_t k, const Matrix& prefix) {
    if (k == fams.size()) {
      out.push_back(prefix);
      return;
    }
    for (const Projector& p : fams[k].projectors()) walk(k + 1, p.matrix() * prefix);
  };
  walk(0, Matrix::Identity(hs.dim(), hs.dim()));
  return out;
}

// q_a = Tr(C_a C_a^dagger) / dim
inline std::vector<double> formal_probabilities(const HistorySet& hs) {
  std::vector<double> q;
  const double d = static_cast<double>(hs.dim());
  for (const Matrix& c : schrodinger_chains(hs)) q.push_back(c.squaredNorm() / d);
  return q;
}

inline double shannon_entropy(const std::vector<double>& p) {
  double s = 0.0;
  for (double x : p) {
    if (x > 0.0) s -= x * std::log(x);
  }
  return s;
}

inline double s_hat(const HistorySet& hs) { return shannon_entropy(formal_probabilities(hs)); }

// ------------------------------------------------------------- constraints

enum class ConstraintPart { normalization, real, imag };

constexpr std::string_view to_string(ConstraintPart p) noexcept {
  switch (p) {
    case ConstraintPart::normalization: return "norm";
    case ConstraintPart::real: return "re";
    case ConstraintPart::imag: return "im";
  }
  return "norm";
}

struct Constraint {
  HermitianOperator op;
  double target;
  ConstraintPart part;
  std::size_t alpha = 0;        // lexicographic positions, unused for normalization
  std::size_t alpha_prime = 0;
};

struct ConstraintSystem {
  Index dim = 0;
  std::vector<Constraint> constraints;  // independent, normalization first
  std::size_t candidate_count = 0;      // before rank reduction
};

namespace detail {

// Incremental Gram-Schmidt on Hermitian matrices with the real Frobenius
// inner product Re Tr(A B).
class HermitianSpan {
 public:
  explicit HermitianSpan(Index d) : d_(d) {}

  bool full() const { return static_cast<Index>(basis_.size()) >= d_ * d_; }
  std::size_t size() const { return basis_.size(); }
  const std::vector<Matrix>& basis() const { return basis_; }

  // Adds the component of `a` outside the span; returns the coefficients of
  // the new unit vector in terms of (previous basis, a) or false if dependent.
  bool add(const Matrix& a, double cutoff, RealVector* along = nullptr, double* scale = nullptr) {
    const double norm = a.norm();
    if (!(norm > 0.0) || full()) return false;
    Matrix r = a;
    RealVector coef = RealVector::Zero(static_cast<Index>(basis_.size()));
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t i = 0; i < basis_.size(); ++i) {
        const double c = basis_[i].cwiseProduct(r.conjugate()).sum().real();
        r -= c * basis_[i];
        coef(static_cast<Index>(i)) += c;
      }
    }
    const double rn = r.norm();
    if (rn <= cutoff * norm) return false;
    basis_.push_back(r / rn);
    if (along != nullptr) *along = coef;
    if (scale != nullptr) *scale = rn;
    return true;
  }

 private:
  Index d_;
  std::vector<Matrix> basis_;
};

}  // namespace detail

inline ConstraintSystem build_constraints(const HistorySet& hs, double cutoff = tol::rank_cutoff) {
  const Index d = hs.dim();
  const Matrix& rho = hs.rho().matrix();
  ConstraintSystem cs;
  cs.dim = d;
  detail::HermitianSpan span(d);

  auto offer = [&](Matrix a, ConstraintPart part, std::size_t i, std::size_t j) {
    ++cs.candidate_count;
    a = (0.5 * (a + a.adjoint())).eval();
    if (!span.add(a, cutoff)) return;
    const double target = detail::trace_of_product(a, rho).real();
    cs.constraints.push_back(Constraint{HermitianOperator(std::move(a)), target, part, i, j});
  };

  offer(Matrix::Identity(d, d), ConstraintPart::normalization, 0, 0);
  const auto chains = schrodinger_chains(hs);
  std::vector<std::size_t> live;
  for (std::size_t i = 0; i < chains.size(); ++i) {
    if (max_abs(chains[i]) > tol::zero) live.push_back(i);
  }
  const cplx minus_half_i(0.0, -0.5);
  for (std::size_t x = 0; x < live.size(); ++x) {
    for (std::size_t y = x; y < live.size(); ++y) {
      const std::size_t i = live[x], j = live[y];
      const Matrix prod = chains[i].adjoint() * chains[j];
      if (max_abs(prod) <= tol::zero) {
        cs.candidate_count += (i == j) ? 1 : 2;
        continue;
      }
      offer(prod, ConstraintPart::real, i, j);
      if (i != j) offer(Matrix(minus_half_i * (prod - prod.adjoint())), ConstraintPart::imag, i, j);
    }
  }
  return cs;
}

// -------------------------------------------------------------- max entropy

enum class SolverMethod { newton, bfgs, gradient };

constexpr std::string_view to_string(SolverMethod m) noexcept {
  switch (m) {
    case SolverMethod::newton: return "newton";
    case SolverMethod::bfgs: return "bfgs";
    case SolverMethod::gradient: return "gradient";
  }
  return "newton";
}

struct MaxentOptions {
  double tolerance = tol::solver;
  std::size_t max_iterations = 10000;
  SolverMethod method = SolverMethod::newton;
};

struct ConvergenceInfo {
  std::size_t iterations = 0;
  double final_residual = 0.0;  // max |Tr(A_k rho~) - c_k| over the constraints
  bool converged = false;
  SolverMethod method = SolverMethod::newton;
  std::vector<double> dual_objective;  // one entry per accepted step, starting at lambda = 0
};

struct MaxentResult {
  DensityMatrix rho;
  double entropy = 0.0;
  ConvergenceInfo info;
};

namespace detail {

// rho(lambda) = exp(-sum lambda_k B_k) / Z, with the spectral data the
// derivatives need.
struct Gibbs {
  RealVector mu;    // eigenvalues of -sum lambda B
  Matrix vectors;
  RealVector p;     // e^mu / Z
  double log_z = 0.0;

  Gibbs(const std::vector<Matrix>& b, const RealVector& lambda, Index d) {
    Matrix m = Matrix::Zero(d, d);
    for (std::size_t k = 0; k < b.size(); ++k) m -= lambda(static_cast<Index>(k)) * b[k];
    Eigen::SelfAdjointEigenSolver<Matrix> es(m);
    mu = es.eigenvalues();
    vectors = es.eigenvectors();
    const double top = mu.maxCoeff();
    p = (mu.array() - top).exp();
    const double z = p.sum();
    p /= z;
    log_z = top + std::log(z);
  }

  Matrix density() const { return vectors * p.cast<cplx>().asDiagonal() * vectors.adjoint(); }

  double entropy() const {
    double s = 0.0;
    for (Index i = 0; i < p.size(); ++i) {
      if (p(i) > 0.0) s -= p(i) * std::log(p(i));
    }
    return s;
  }
};

struct DualProblem {
  Index d;
  std::vector<Matrix> b;  // orthonormal, traceless
  RealVector target;      // Tr(B_k rho)
  const std::vector<Constraint>* original;

  double value(const Gibbs& g, const RealVector& lambda) const { return g.log_z + lambda.dot(target); }

  RealVector expectations(const Gibbs& g, std::vector<Matrix>* rotated = nullptr) const {
    RealVector e(static_cast<Index>(b.size()));
    for (std::size_t k = 0; k < b.size(); ++k) {
      Matrix bt = g.vectors.adjoint() * b[k] * g.vectors;
      e(static_cast<Index>(k)) = (bt.diagonal().real().array() * g.p.array()).sum();
      if (rotated != nullptr) rotated->push_back(std::move(bt));
    }
    return e;
  }

  // Exact Hessian of ln Z: divided differences of exp on the spectrum.
  RealMatrix hessian(const Gibbs& g, const std::vector<Matrix>& rotated, const RealVector& e) const {
    const Index n = d;
    RealMatrix w(n, n);
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < n; ++j) {
        const double dm = g.mu(i) - g.mu(j);
        if (std::abs(dm) < 1e-12) {
          w(i, j) = g.p(i);
        } else {
          // (p_i - p_j) / (mu_i - mu_j) from the larger weight, via expm1.
          const double gap = std::abs(dm);
          w(i, j) = std::max(g.p(i), g.p(j)) * -std::expm1(-gap) / gap;
        }
      }
    }
    const Eigen::ArrayXXd sw = w.array().max(0.0).sqrt();
    const Index k = static_cast<Index>(rotated.size());
    Matrix cols(n * n, k);
    for (Index c = 0; c < k; ++c) {
      Matrix scaled = rotated[c].array() * sw.cast<cplx>();
      cols.col(c) = Eigen::Map<const Vector>(scaled.data(), n * n);
    }
    RealMatrix h = (cols.adjoint() * cols).real();
    h -= e * e.transpose();
    return 0.5 * (h + h.transpose());
  }

  double residual(const Matrix& rho) const {
    double r = 0.0;
    for (const Constraint& c : *original) {
      r = std::max(r, std::abs(trace_of_product(c.op.matrix(), rho).real() - c.target));
    }
    return r;
  }
};

inline DualProblem reduce_for_solver(const ConstraintSystem& cs) {
  const Index d = cs.dim;
  DualProblem prob{d, {}, RealVector(), &cs.constraints};
  std::vector<double> targets;
  // Traceless parts, orthonormalized; each basis element is tracked as a
  // combination of the centred originals so its target is known without rho.
  detail::HermitianSpan span(d);
  std::vector<RealVector> combos;  // combos[k] over constraint indices
  const Index m = static_cast<Index>(cs.constraints.size());
  for (Index j = 0; j < m; ++j) {
    const Constraint& c = cs.constraints[static_cast<std::size_t>(j)];
    if (c.part == ConstraintPart::normalization) continue;
    const double mean = c.op.matrix().trace().real() / static_cast<double>(d);
    const Matrix centred = c.op.matrix() - mean * Matrix::Identity(d, d);
    RealVector along;
    double scale = 0.0;
    if (!span.add(centred, tol::rank_cutoff, &along, &scale)) continue;
    RealVector combo = RealVector::Zero(m);
    combo(j) = 1.0;
    for (Index i = 0; i < along.size(); ++i) combo -= along(i) * combos[static_cast<std::size_t>(i)];
    combo /= scale;
    combos.push_back(combo);
    double t = 0.0;
    for (Index i = 0; i < m; ++i) {
      if (combo(i) == 0.0) continue;
      const Constraint& ci = cs.constraints[static_cast<std::size_t>(i)];
      t += combo(i) * (ci.target - ci.op.matrix().trace().real() / static_cast<double>(d));
    }
    targets.push_back(t);
  }
  prob.b = span.basis();
  prob.target = Eigen::Map<const RealVector>(targets.data(), static_cast<Index>(targets.size()));
  return prob;
}

}  // namespace detail

// Maximizes -Tr(rho~ ln rho~) subject to the constraints by minimizing the
// convex dual ln Z(lambda) + lambda . c, starting from lambda = 0.
inline MaxentResult maxent(const ConstraintSystem& cs, const MaxentOptions& opts = {}) {
  const detail::DualProblem prob = detail::reduce_for_solver(cs);
  const Index k = static_cast<Index>(prob.b.size());
  const Index d = cs.dim;

  RealVector lambda = RealVector::Zero(k);
  detail::Gibbs g(prob.b, lambda, d);
  ConvergenceInfo info;
  info.method = opts.method;
  double f = prob.value(g, lambda);
  info.dual_objective.push_back(f);
  RealMatrix inv_h = RealMatrix::Identity(k, k);  // BFGS inverse Hessian
  double step_hint = 1.0;

  auto finish = [&](const detail::Gibbs& best) {
    const Matrix rho = best.density();
    info.final_residual = prob.residual(rho);
    info.converged = info.final_residual <= opts.tolerance;
    return MaxentResult{DensityMatrix(rho, 1e-8), best.entropy(), info};
  };

  for (info.iterations = 0; info.iterations < opts.max_iterations; ++info.iterations) {
    std::vector<Matrix> rotated;
    const RealVector e = prob.expectations(g, &rotated);
    const RealVector grad = prob.target - e;
    if (prob.residual(g.density()) <= opts.tolerance) break;

    RealVector dir;
    if (opts.method == SolverMethod::newton) {
      RealMatrix h = prob.hessian(g, rotated, e);
      double ridge = 1e-14 * std::max(1.0, h.diagonal().maxCoeff());
      for (int attempt = 0; attempt < 20; ++attempt) {
        Eigen::LDLT<RealMatrix> ldlt(h + ridge * RealMatrix::Identity(k, k));
        if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
          dir = -ldlt.solve(grad);
          if (dir.allFinite()) break;
        }
        ridge *= 100.0;
      }
    } else if (opts.method == SolverMethod::bfgs) {
      dir = -inv_h * grad;
    } else {
      dir = -grad;
    }
    if (dir.size() != k || !dir.allFinite() || grad.dot(dir) >= 0.0) {
      dir = -grad;
      inv_h.setIdentity();
    }

    // Backtracking (Armijo) line search; only decreasing steps are accepted.
    double s = opts.method == SolverMethod::gradient ? step_hint : 1.0;
    const double slope = grad.dot(dir);
    bool accepted = false;
    RealVector next;
    for (int ls = 0; ls < 60; ++ls) {
      next = lambda + s * dir;
      detail::Gibbs trial(prob.b, next, d);
      const double fn = prob.value(trial, next);
      if (std::isfinite(fn) && fn <= f + 1e-4 * s * slope && fn <= f) {
        if (opts.method == SolverMethod::bfgs) {
          const RealVector grad_next = prob.target - prob.expectations(trial);
          const RealVector sv = next - lambda, yv = grad_next - grad;
          const double sy = sv.dot(yv);
          if (sy > 1e-16) {
            const RealMatrix eye = RealMatrix::Identity(k, k);
            const RealMatrix left = eye - (sv * yv.transpose()) / sy;
            inv_h = left * inv_h * left.transpose() + (sv * sv.transpose()) / sy;
          }
        }
        lambda = next;
        g = std::move(trial);
        f = fn;
        info.dual_objective.push_back(f);
        accepted = true;
        break;
      }
      s *= 0.5;
    }
    if (!accepted) break;  // no decrease possible at double precision
    step_hint = std::min(1e3, s * 2.0);
  }
  return finish(g);
}

struct ClassicalityReport {
  double s_hat = 0.0;
  std::vector<std::string> labels;
  std::vector<double> q_hat;
  double q_sum = 0.0;
  std::size_t nonvanishing_chains = 0;
  double s_maxent = 0.0;
  double s_rho = 0.0;
  ConvergenceInfo solver;
  std::size_t constraints_before = 0;
  std::size_t constraints_after = 0;
};

inline ClassicalityReport classicality_report(const HistorySet& hs, const MaxentOptions& opts = {}) {
  ClassicalityReport r;
  r.labels = hs.labels();
  r.q_hat = formal_probabilities(hs);
  for (double q : r.q_hat) {
    r.q_sum += q;
    r.nonvanishing_chains += q > tol::zero;
  }
  r.s_hat = shannon_entropy(r.q_hat);
  const ConstraintSystem cs = build_constraints(hs);
  r.constraints_before = cs.candidate_count;
  r.constraints_after = cs.constraints.size();
  const MaxentResult m = maxent(cs, opts);
  r.s_maxent = m.entropy;
  r.solver = m.info;
  r.s_rho = entropy(hs.rho());
  return r;
}

}  // namespace dhist
