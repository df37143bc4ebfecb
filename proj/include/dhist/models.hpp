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

// models.hpp: reproducible model constructions: a two-apparatus measurement,
// a qubit environment, qubit basis sequences and random sets.

#pragma once

#include <Eigen/Eigenvalues>

#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "dhist/history.hpp"

namespace dhist {

// How an expected value was obtained.
enum class ExpectationBasis { construction, analytic };

struct Expected {
  double value;
  ExpectationBasis basis;
  std::string oracle;
};

struct ModelBundle {
  std::string name;
  HistorySet history_set;
  std::map<std::string, Expected> expected;
  std::map<std::string, Matrix> operators;  // auxiliary operators, e.g. pointer projectors
};

namespace detail {

inline Vector basis_vector(Index d, Index i) {
  Vector v = Vector::Zero(d);
  v(i) = 1.0;
  return v;
}

// Qubit projectors onto the eigenbasis of a Pauli axis, as (matrices, labels).
inline std::pair<std::vector<Matrix>, std::vector<std::string>> qubit_basis(char axis) {
  const double h = 1.0 / std::sqrt(2.0);
  Vector a(2), b(2);
  std::vector<std::string> labels;
  switch (axis) {
    case 'z':
      a << 1.0, 0.0;
      b << 0.0, 1.0;
      labels = {"0", "1"};
      break;
    case 'x':
      a << h, h;
      b << h, -h;
      labels = {"+", "-"};
      break;
    case 'y':
      a << h, cplx(0.0, h);
      b << h, cplx(0.0, -h);
      labels = {"+i", "-i"};
      break;
    default:
      throw Error(Errc::invalid_model, std::string("unknown qubit axis '") + axis + "'");
  }
  return {{a * a.adjoint(), b * b.adjoint()}, labels};
}

// A unitary with eigenvalues on the unit circle, as exp(-i H) for Hermitian H.
inline Matrix log_generator(const Matrix& u) {
  Eigen::ComplexSchur<Matrix> schur(u);
  const Matrix& t = schur.matrixT();
  const Matrix& q = schur.matrixU();
  Vector phase(t.rows());
  for (Index i = 0; i < t.rows(); ++i) phase(i) = -std::arg(t(i, i));
  Matrix h = q * phase.asDiagonal() * q.adjoint();
  return 0.5 * (h + h.adjoint());
}

}  // namespace detail

// ----------------------------------------------------------- measurement

// System qubit with two apparatus qubits, basis index = s*4 + m1*2 + m2.  One
// time-independent H whose unit-time step A writes the system's z value into
// apparatus 1 during (t0, t1) and its x value into apparatus 2 during (t1, t2).
// Histories: system z at t1 = 1, system x at t2 = 2.
inline ModelBundle measurement_model(cplx a, cplx b) {
  const double norm2 = std::norm(a) + std::norm(b);
  if (std::abs(norm2 - 1.0) > 1e-3) {
    throw Error(Errc::invalid_model, "|a|^2 + |b|^2 = " + std::to_string(norm2) + " is not 1");
  }
  const double scale = 1.0 / std::sqrt(norm2);
  a *= scale;
  b *= scale;

  const Index d = 8;
  auto e = [&](Index i) { return detail::basis_vector(d, i); };
  const double h = 1.0 / std::sqrt(2.0);
  // Inputs and images of the unit-time step; the last four complete it to a
  // unitary on the orthogonal complements.
  const std::vector<std::pair<Vector, Vector>> map = {
      {e(0), e(1)},                      // |0,00> -> |0,01>
      {e(4), e(6)},                      // |1,00> -> |1,10>
      {e(1), h * (e(0) + e(5))},         // |0,01> -> copy x into apparatus 2
      {e(6), h * (e(2) + e(7))},         // |1,10> -> same with apparatus 1 set
      {e(2), h * (e(0) - e(5))},
      {e(3), e(3)},
      {e(5), h * (e(2) - e(7))},
      {e(7), e(4)},
  };
  Matrix step = Matrix::Zero(d, d);
  for (const auto& [in, out] : map) step += out * in.adjoint();
  const HermitianOperator ham(detail::log_generator(step), 1e-9);

  std::vector<ScheduledFamily> fams;
  for (auto [axis, time] : {std::pair<char, double>{'z', 1.0}, {'x', 2.0}}) {
    auto [ps, labels] = detail::qubit_basis(axis);
    std::vector<Projector> full;
    for (const Matrix& p : ps) full.emplace_back(kron(p, Matrix::Identity(4, 4)));
    fams.push_back(make_family(time, std::move(full), labels));
  }
  Vector sys(2);
  sys << a, b;
  Vector app = Vector::Zero(4);
  app(0) = 1.0;
  const StateVector psi = StateVector::normalized(kron(sys, app));
  HistorySet hs(ham, 0.0, DensityMatrix::from_state(psi), std::move(fams));

  ModelBundle bundle{"measurement", std::move(hs), {}, {}};
  const Spectrum& sp = bundle.history_set.spectrum();
  // Pointer projectors, pulled back from t2 into the Heisenberg picture.
  auto pointer = [&](const Matrix& p) { return sp.conjugate(-2.0, p); };
  const auto zb = detail::qubit_basis('z').first;
  const auto xb = detail::qubit_basis('x').first;
  const Matrix i2 = Matrix::Identity(2, 2);
  for (int k = 0; k < 2; ++k) {
    bundle.operators["Q1_" + std::to_string(k)] = pointer(kron(kron(i2, zb[k]), i2));
    bundle.operators["Q2_" + std::to_string(k)] = pointer(kron(kron(i2, i2), xb[k]));
  }
  bundle.operators["step"] = step;
  const double pa = std::norm(a), pb = std::norm(b);
  const std::vector<double> probs = {pa / 2, pa / 2, pb / 2, pb / 2};
  for (std::size_t i = 0; i < probs.size(); ++i) {
    bundle.expected["p" + std::to_string(i)] = {probs[i], ExpectationBasis::analytic,
                                                "|c_s|^2 |<x|s>|^2 from the explicit step map"};
  }
  bundle.expected["strong_residual"] = {0.0, ExpectationBasis::construction,
                                        "pointer projectors record both outcomes"};
  return bundle;
}

// ----------------------------------------------------------- environment

// System qubit (most significant) with n_env environment qubits starting in
// |+>.  H = (theta/4) |1><1|_sys (x) sum_j Z_j, so each unit interval rotates
// every environment qubit by theta/2 about z when the system is |1>.
// Histories: system z at t1 = 1, system x at t2 = 2, from |+>.
inline ModelBundle environment_model(int n_env, double theta) {
  if (n_env < 0 || n_env > 10) throw Error(Errc::invalid_model, "n_env must be in [0, 10]");
  const double pi = std::acos(-1.0);
  if (!(theta > 0.0 && theta <= pi)) throw Error(Errc::invalid_model, "theta must be in (0, pi]");
  const Index env = Index{1} << n_env;
  const Index d = 2 * env;
  Matrix ham = Matrix::Zero(d, d);
  for (Index j = 0; j < env; ++j) {
    int zsum = 0;
    for (int q = 0; q < n_env; ++q) zsum += ((j >> q) & 1) ? -1 : 1;
    ham(env + j, env + j) = 0.25 * theta * zsum;
  }
  std::vector<ScheduledFamily> fams;
  for (auto [axis, time] : {std::pair<char, double>{'z', 1.0}, {'x', 2.0}}) {
    auto [ps, labels] = detail::qubit_basis(axis);
    std::vector<Projector> full;
    for (const Matrix& p : ps) full.emplace_back(kron(p, Matrix::Identity(env, env)));
    fams.push_back(make_family(time, std::move(full), labels));
  }
  const StateVector psi(Vector::Constant(d, cplx(1.0 / std::sqrt(static_cast<double>(d)), 0.0)));
  HistorySet hs(HermitianOperator(std::move(ham)), 0.0, DensityMatrix::from_state(psi),
                std::move(fams));
  ModelBundle bundle{"environment", std::move(hs), {}, {}};
  bundle.expected["max_normalized_overlap"] = {
      std::pow(std::abs(std::cos(theta / 2.0)), n_env), ExpectationBasis::analytic,
      "product of per-qubit overlaps <+|exp(-i theta Z / 2)|+>"};
  return bundle;
}

// ------------------------------------------------------------ qubit sets

// One qubit, one family per character of `axes` (z, x or y) at t = 1, 2, ...
inline HistorySet qubit_sequence(const std::string& axes, const Matrix& hamiltonian,
                                 const DensityMatrix& rho, double dt = 1.0) {
  std::vector<ScheduledFamily> fams;
  for (std::size_t k = 0; k < axes.size(); ++k) {
    auto [ps, labels] = detail::qubit_basis(axes[k]);
    std::vector<Projector> projectors;
    for (Matrix& p : ps) projectors.emplace_back(std::move(p));
    fams.push_back(make_family(dt * static_cast<double>(k + 1), std::move(projectors), labels));
  }
  return HistorySet(HermitianOperator(hamiltonian), 0.0, rho, std::move(fams));
}

inline StateVector qubit_state(const std::string& name) {
  const double h = 1.0 / std::sqrt(2.0);
  Vector v(2);
  if (name == "0") {
    v << 1.0, 0.0;
  } else if (name == "1") {
    v << 0.0, 1.0;
  } else if (name == "+") {
    v << h, h;
  } else if (name == "-") {
    v << h, -h;
  } else if (name == "+i") {
    v << h, cplx(0.0, h);
  } else {
    throw Error(Errc::invalid_model, "unknown qubit state '" + name + "'");
  }
  return StateVector(v);
}

// --------------------------------------------------------------- random

namespace detail {

// Deterministic per seed on every platform: no std:: distributions.
class ModelRng {
 public:
  explicit ModelRng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  std::size_t below(std::size_t n) { return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n; }

  double normal() {
    const double two_pi = 2.0 * std::acos(-1.0);
    const double u = 1.0 - uniform();  // (0, 1]
    return std::sqrt(-2.0 * std::log(u)) * std::cos(two_pi * uniform());
  }

  cplx complex_normal() {
    const double re = normal();
    return {re, normal()};
  }

 private:
  std::mt19937_64 engine_;
};

inline Matrix random_hermitian(ModelRng& rng, Index d) {
  Matrix g(d, d);
  for (Index j = 0; j < d; ++j) {
    for (Index i = 0; i < d; ++i) g(i, j) = rng.complex_normal();
  }
  return (g + g.adjoint()) / (2.0 * std::sqrt(static_cast<double>(d)));
}

inline Vector random_unit(ModelRng& rng, Index d) {
  Vector v(d);
  for (Index i = 0; i < d; ++i) v(i) = rng.complex_normal();
  return v / v.norm();
}

}  // namespace detail

// Random H, random pure or mixed rho, and n_times families built by grouping
// the eigenvectors of random Hermitian matrices.
inline ModelBundle random_model(std::uint64_t seed, Index dim, std::size_t n_times) {
  if (dim < 1 || dim > 16) throw Error(Errc::invalid_model, "dim must be in [1, 16]");
  if (n_times > 3) throw Error(Errc::invalid_model, "n_times must be at most 3");
  detail::ModelRng rng(seed);
  const Matrix ham = detail::random_hermitian(rng, dim);

  const bool pure = rng.uniform() < 0.5;
  Matrix rho;
  Vector psi;
  if (pure) {
    psi = detail::random_unit(rng, dim);
  } else {
    const std::size_t rank = 1 + rng.below(static_cast<std::size_t>(dim));
    rho = Matrix::Zero(dim, dim);
    double total = 0.0;
    for (std::size_t r = 0; r < std::max<std::size_t>(rank, 2); ++r) {
      const Vector v = detail::random_unit(rng, dim);
      const double w = 0.05 + rng.uniform();
      rho += w * v * v.adjoint();
      total += w;
    }
    rho /= total;
  }

  std::vector<ScheduledFamily> fams;
  double t = 0.0;
  for (std::size_t k = 0; k < n_times; ++k) {
    t += 0.1 + 1.4 * rng.uniform();
    const Eigen::SelfAdjointEigenSolver<Matrix> es(detail::random_hermitian(rng, dim));
    const std::size_t groups =
        1 + rng.below(static_cast<std::size_t>(std::min<Index>(dim, 4)));
    std::vector<std::size_t> group_of(static_cast<std::size_t>(dim));
    for (std::size_t i = 0; i < group_of.size(); ++i) {
      group_of[i] = i < groups ? i : rng.below(groups);
    }
    std::vector<Projector> ps;
    for (std::size_t g = 0; g < groups; ++g) {
      Matrix p = Matrix::Zero(dim, dim);
      for (Index i = 0; i < dim; ++i) {
        if (group_of[static_cast<std::size_t>(i)] == g) {
          p += es.eigenvectors().col(i) * es.eigenvectors().col(i).adjoint();
        }
      }
      ps.emplace_back(std::move(p));
    }
    fams.push_back(make_family(t, std::move(ps)));
  }
  DensityMatrix state =
      pure ? DensityMatrix::from_state(StateVector::normalized(psi)) : DensityMatrix(rho);
  HistorySet hs(HermitianOperator(ham), 0.0, std::move(state), std::move(fams));
  ModelBundle bundle{"random", std::move(hs), {}, {}};
  bundle.expected["sum_D"] = {1.0, ExpectationBasis::construction, "exhaustive families"};
  return bundle;
}

// ------------------------------------------------------------- transport

enum class TransportMode {
  full,       // conjugate rho, H and every Schrödinger projector
  histories,  // conjugate rho and the Heisenberg projectors; H is kept
};

inline HistorySet unitary_transport(const HistorySet& hs, const Matrix& u,
                                    TransportMode mode = TransportMode::full,
                                    double tolerance = tol::herm) {
  require_same_dim(hs.dim(), u.rows(), "unitary_transport");
  if (!is_unitary(u, tolerance)) throw Error(Errc::non_unitary, "U^dagger U != 1");
  auto conj = [&](const Matrix& m) { return Matrix(u * m * u.adjoint()); };
  DensityMatrix rho = hs.rho().is_pure()
                          ? DensityMatrix::from_state(StateVector::normalized(
                                u * hs.rho().pure_state()->amplitudes()))
                          : DensityMatrix(conj(hs.rho().matrix()));
  std::vector<ScheduledFamily> fams;
  for (std::size_t k = 0; k < hs.families().size(); ++k) {
    const ScheduledFamily& f = hs.families()[k];
    std::vector<Projector> ps;
    for (std::size_t a = 0; a < f.size(); ++a) {
      if (mode == TransportMode::full) {
        ps.emplace_back(conj(f.projectors()[a].matrix()));
      } else {
        const Matrix heis = conj(heisenberg_projector(hs, k, a).matrix());
        ps.emplace_back(hs.spectrum().conjugate(f.time() - hs.t0(), heis));
      }
    }
    fams.push_back(make_family(f.time(), std::move(ps), f.labels()));
  }
  HermitianOperator ham = mode == TransportMode::full
                              ? HermitianOperator(conj(hs.hamiltonian().matrix()))
                              : hs.hamiltonian();
  return HistorySet(std::move(ham), hs.t0(), std::move(rho), std::move(fams));
}

}  // namespace dhist
