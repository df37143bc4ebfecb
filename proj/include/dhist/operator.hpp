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

// operator.hpp: dense complex operators with role-checked invariants,
// Hermitian spectra, propagators and picture changes.

#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dhist/error.hpp"

namespace dhist {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;
using RealMatrix = Eigen::MatrixXd;
using Index = Eigen::Index;

namespace tol {
inline constexpr double herm = 1e-9;          // construction-time invariants
inline constexpr double eig = 1e-10;          // decomposition residuals
inline constexpr double zero = 1e-12;         // vanishing chains / branches
inline constexpr double rank_cutoff = 1e-10;  // relative singular-value cutoff
inline constexpr double decoherence = 1e-8;   // default off-diagonal tolerance
inline constexpr double solver = 1e-8;        // max-entropy constraint residual
// Above this dimension, product-type invariants (P^2 = P, PQ = 0, [P,Q] = 0)
// are checked with deterministic probe vectors instead of full products.
inline constexpr Index dense_check_limit = 256;
}  // namespace tol

inline double max_abs(const Matrix& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

inline double max_abs(const Vector& v) {
  return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff();
}

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Columns of unit-modulus entries with pseudo-random phases.
inline Matrix probe_vectors(Index n, Index count) {
  Matrix v(n, count);
  std::uint64_t state = 0x5DEECE66DULL + static_cast<std::uint64_t>(n);
  const double two_pi = 2.0 * std::acos(-1.0);
  for (Index c = 0; c < count; ++c) {
    for (Index r = 0; r < n; ++r) {
      const double u = static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53;
      v(r, c) = std::polar(1.0, two_pi * u);
    }
  }
  return v;
}

// Entry-scale estimate of max|a*b - c| (c may be null for zero).  Exact for
// dimensions up to tol::dense_check_limit.
inline double product_residual(const Matrix& a, const Matrix& b, const Matrix* c) {
  const Index n = a.rows();
  if (n <= tol::dense_check_limit) {
    Matrix r = a * b;
    if (c != nullptr) r -= *c;
    return max_abs(r);
  }
  const Matrix probes = probe_vectors(n, 4);
  Matrix r = a * (b * probes);
  if (c != nullptr) r -= (*c) * probes;
  return max_abs(r) / std::sqrt(static_cast<double>(n));
}

// Entry-scale estimate of max|a*b - b*a|.
inline double commutator_residual(const Matrix& a, const Matrix& b) {
  const Index n = a.rows();
  if (n <= tol::dense_check_limit) return max_abs(Matrix(a * b - b * a));
  const Matrix probes = probe_vectors(n, 4);
  return max_abs(Matrix(a * (b * probes) - b * (a * probes))) / std::sqrt(static_cast<double>(n));
}

// Tr(a b) without forming the product.
inline cplx trace_of_product(const Matrix& a, const Matrix& b) {
  return a.cwiseProduct(b.transpose()).sum();
}

inline double hermiticity_residual(const Matrix& m) {
  return max_abs(Matrix(m - m.adjoint()));
}

}  // namespace detail

// A square, finite complex matrix.
class Operator {
 public:
  explicit Operator(Matrix m) : m_(std::move(m)) {
    if (m_.rows() < 1 || m_.rows() != m_.cols()) {
      throw Error(Errc::invalid_operator, "operator must be square with dim >= 1, got " +
                                              std::to_string(m_.rows()) + "x" +
                                              std::to_string(m_.cols()));
    }
    if (!m_.allFinite()) throw Error(Errc::invalid_operator, "operator has non-finite entries");
  }

  static Operator identity(Index d) { return Operator(Matrix::Identity(d, d)); }

  Index dim() const noexcept { return m_.rows(); }
  const Matrix& matrix() const noexcept { return m_; }
  cplx operator()(Index i, Index j) const { return m_(i, j); }
  cplx trace() const { return m_.trace(); }
  Operator adjoint() const { return Operator(Matrix(m_.adjoint())); }

 protected:
  Matrix m_;
};

class HermitianOperator : public Operator {
 public:
  explicit HermitianOperator(Matrix m, double tolerance = tol::herm) : Operator(std::move(m)) {
    const double r = detail::hermiticity_residual(m_);
    if (r > tolerance) {
      throw Error(Errc::not_hermitian, "max|H - H^dagger| = " + std::to_string(r));
    }
    m_ = (0.5 * (m_ + m_.adjoint())).eval();
  }

  static HermitianOperator zero(Index d) { return HermitianOperator(Matrix::Zero(d, d)); }
};

class Projector : public HermitianOperator {
 public:
  explicit Projector(Matrix m, double tolerance = tol::herm)
      : HermitianOperator(std::move(m), tolerance) {
    const double r = detail::product_residual(m_, m_, &m_);
    if (r > tolerance) {
      throw Error(Errc::not_projector, "max|P^2 - P| = " + std::to_string(r));
    }
    rank_ = static_cast<Index>(std::llround(m_.trace().real()));
  }

  static Projector identity(Index d) { return Projector(Matrix::Identity(d, d)); }
  static Projector zero(Index d) { return Projector(Matrix::Zero(d, d)); }

  // |v><v| / <v|v>
  static Projector onto(const Vector& v) {
    const double n2 = v.squaredNorm();
    if (!(n2 > 0.0)) throw Error(Errc::invalid_operator, "cannot project onto the zero vector");
    return Projector((v * v.adjoint() / n2).eval());
  }

  // Columns must be orthonormal.
  static Projector onto_span(const Matrix& columns, Index dim) {
    if (columns.cols() == 0) return zero(dim);
    return Projector((columns * columns.adjoint()).eval());
  }

  Index rank() const noexcept { return rank_; }

 private:
  Index rank_ = 0;
};

class StateVector {
 public:
  explicit StateVector(Vector v, double tolerance = tol::herm) : v_(std::move(v)) {
    if (v_.size() < 1 || !v_.allFinite()) {
      throw Error(Errc::invalid_state, "state vector must be finite with dim >= 1");
    }
    const double n = v_.norm();
    if (std::abs(n - 1.0) > tolerance) {
      throw Error(Errc::invalid_state, "state norm " + std::to_string(n) + " is not 1");
    }
  }

  static StateVector normalized(const Vector& v) {
    const double n = v.norm();
    if (!(n > 0.0)) throw Error(Errc::invalid_state, "cannot normalize the zero vector");
    return StateVector(v / n);
  }

  static StateVector basis(Index d, Index i) {
    Vector v = Vector::Zero(d);
    v(i) = 1.0;
    return StateVector(std::move(v));
  }

  Index dim() const noexcept { return v_.size(); }
  const Vector& amplitudes() const noexcept { return v_; }

 private:
  Vector v_;
};

class DensityMatrix : public HermitianOperator {
 public:
  explicit DensityMatrix(Matrix m, double tolerance = tol::herm)
      : HermitianOperator(std::move(m), tolerance) {
    check_trace(tolerance);
    Eigen::SelfAdjointEigenSolver<Matrix> es(m_);
    const RealVector& w = es.eigenvalues();
    if (w(0) < -tolerance) {
      throw Error(Errc::invalid_density_matrix,
                  "smallest eigenvalue " + std::to_string(w(0)) + " is negative");
    }
    const double purity = (m_ * m_).trace().real();
    if (std::abs(purity - 1.0) <= tolerance) {
      pure_ = StateVector::normalized(es.eigenvectors().col(m_.rows() - 1));
    }
  }

  static DensityMatrix from_state(const StateVector& psi) {
    const Vector& v = psi.amplitudes();
    return DensityMatrix((v * v.adjoint()).eval(), psi);
  }

  // rho_ind = 1 / Tr(1)
  static DensityMatrix maximally_mixed(Index d) {
    return DensityMatrix((Matrix::Identity(d, d) / static_cast<double>(d)).eval());
  }

  bool is_pure() const noexcept { return pure_.has_value(); }
  const std::optional<StateVector>& pure_state() const noexcept { return pure_; }

 private:
  // Rank-one outer products are positive by construction; skip the spectrum.
  DensityMatrix(Matrix m, const StateVector& psi) : HermitianOperator(std::move(m)), pure_(psi) {
    check_trace(tol::herm);
  }

  void check_trace(double tolerance) const {
    const cplx tr = m_.trace();
    if (std::abs(tr - cplx(1.0, 0.0)) > tolerance) {
      throw Error(Errc::invalid_density_matrix,
                  "trace " + std::to_string(tr.real()) + " is not 1");
    }
  }

  std::optional<StateVector> pure_;
};

// ------------------------------------------------------------------ algebra

inline void require_same_dim(Index a, Index b, const char* what) {
  if (a != b) {
    throw Error(Errc::dimension_mismatch, std::string(what) + ": " + std::to_string(a) +
                                              " vs " + std::to_string(b));
  }
}

inline Operator multiply(const Operator& a, const Operator& b) {
  require_same_dim(a.dim(), b.dim(), "multiply");
  return Operator((a.matrix() * b.matrix()).eval());
}

inline Operator tensor(const Operator& a, const Operator& b) {
  return Operator(Matrix(Eigen::kroneckerProduct(a.matrix(), b.matrix())));
}

inline Matrix kron(const Matrix& a, const Matrix& b) {
  return Matrix(Eigen::kroneckerProduct(a, b));
}

inline Vector kron(const Vector& a, const Vector& b) {
  Vector out(a.size() * b.size());
  for (Index i = 0; i < a.size(); ++i) out.segment(i * b.size(), b.size()) = a(i) * b;
  return out;
}

inline Matrix commutator(const Matrix& a, const Matrix& b) { return a * b - b * a; }

inline bool is_unitary(const Matrix& u, double tolerance = tol::eig) {
  if (u.rows() != u.cols()) return false;
  return max_abs(Matrix(u.adjoint() * u - Matrix::Identity(u.rows(), u.cols()))) <= tolerance;
}

// ------------------------------------------------------------------ spectra

struct EigenDecomposition {
  RealVector values;  // ascending
  Matrix vectors;     // columns, unitary
};

// Spectral decomposition of a Hermitian operator.  The matrix is split into
// the connected components of its sparsity graph, so block-diagonal (and in
// particular diagonal) Hamiltonians are diagonalized and exponentiated block
// by block.
class Spectrum {
 public:
  explicit Spectrum(const HermitianOperator& h) : dim_(h.dim()) {
    const Matrix& m = h.matrix();
    std::vector<Index> parent(static_cast<std::size_t>(dim_));
    std::iota(parent.begin(), parent.end(), Index{0});
    auto find = [&](Index x) {
      while (parent[x] != x) x = parent[x] = parent[parent[x]];
      return x;
    };
    for (Index j = 0; j < dim_; ++j) {
      for (Index i = 0; i < j; ++i) {
        if (m(i, j) != cplx(0.0, 0.0)) {
          const Index a = find(i), b = find(j);
          if (a != b) parent[std::max(a, b)] = std::min(a, b);
        }
      }
    }
    std::vector<Index> block_of(static_cast<std::size_t>(dim_), -1);
    for (Index i = 0; i < dim_; ++i) {
      const Index root = find(i);
      if (block_of[root] < 0) {
        block_of[root] = static_cast<Index>(blocks_.size());
        blocks_.emplace_back();
      }
      blocks_[block_of[root]].index.push_back(i);
    }
    for (Block& b : blocks_) {
      const Index n = static_cast<Index>(b.index.size());
      if (n == 1) {
        b.values = RealVector::Constant(1, m(b.index[0], b.index[0]).real());
        b.vectors = Matrix::Identity(1, 1);
        continue;
      }
      const Matrix sub = (n == dim_) ? m : Matrix(m(b.index, b.index));
      Eigen::SelfAdjointEigenSolver<Matrix> es(sub);
      if (es.info() != Eigen::Success) {
        throw Error(Errc::invalid_operator, "Hermitian eigensolver did not converge");
      }
      b.values = es.eigenvalues();
      b.vectors = es.eigenvectors();
    }
  }

  Index dim() const noexcept { return dim_; }
  std::size_t block_count() const noexcept { return blocks_.size(); }

  EigenDecomposition decomposition() const {
    struct Pair { double value; std::size_t block; Index col; };
    std::vector<Pair> pairs;
    pairs.reserve(static_cast<std::size_t>(dim_));
    for (std::size_t bi = 0; bi < blocks_.size(); ++bi) {
      for (Index c = 0; c < blocks_[bi].values.size(); ++c) {
        pairs.push_back({blocks_[bi].values(c), bi, c});
      }
    }
    std::stable_sort(pairs.begin(), pairs.end(),
                     [](const Pair& a, const Pair& b) { return a.value < b.value; });
    EigenDecomposition out{RealVector(dim_), Matrix::Zero(dim_, dim_)};
    for (Index k = 0; k < dim_; ++k) {
      const Pair& p = pairs[static_cast<std::size_t>(k)];
      const Block& b = blocks_[p.block];
      out.values(k) = p.value;
      for (std::size_t r = 0; r < b.index.size(); ++r) {
        out.vectors(b.index[r], k) = b.vectors(static_cast<Index>(r), p.col);
      }
    }
    return out;
  }

  // exp(-i H dt)
  Matrix propagator(double dt) const {
    if (blocks_.size() == 1) return block_unitary(blocks_[0], dt);
    Matrix u = Matrix::Zero(dim_, dim_);
    for (const Block& b : blocks_) u(b.index, b.index) = block_unitary(b, dt);
    return u;
  }

  // exp(-i H dt) v
  Vector evolve(double dt, const Vector& v) const {
    require_same_dim(dim_, v.size(), "evolve");
    if (dt == 0.0) return v;
    if (blocks_.size() == 1) return apply_block(blocks_[0], dt, v);
    Vector out(dim_);
    for (const Block& b : blocks_) {
      if (b.index.size() == 1) {
        const Index i = b.index[0];
        out(i) = std::polar(1.0, -b.values(0) * dt) * v(i);
      } else {
        out(b.index) = apply_block(b, dt, Vector(v(b.index)));
      }
    }
    return out;
  }

  // U m U^dagger with U = exp(-i H dt)
  Matrix conjugate(double dt, const Matrix& m) const {
    require_same_dim(dim_, m.rows(), "conjugate");
    if (dt == 0.0) return m;
    if (blocks_.size() == 1) {
      const Matrix u = block_unitary(blocks_[0], dt);
      return u * m * u.adjoint();
    }
    // Right factor column block by column block, then left factor row block by row block.
    Matrix t(dim_, dim_);
    for (const Block& b : blocks_) {
      if (b.index.size() == 1) {
        const Index j = b.index[0];
        t.col(j) = m.col(j) * std::polar(1.0, b.values(0) * dt);
      } else {
        t(Eigen::all, b.index) = Matrix(m(Eigen::all, b.index)) * block_unitary(b, dt).adjoint();
      }
    }
    Matrix out(dim_, dim_);
    for (const Block& b : blocks_) {
      if (b.index.size() == 1) {
        const Index i = b.index[0];
        out.row(i) = std::polar(1.0, -b.values(0) * dt) * t.row(i);
      } else {
        out(b.index, Eigen::all) = block_unitary(b, dt) * Matrix(t(b.index, Eigen::all));
      }
    }
    return out;
  }

 private:
  struct Block {
    std::vector<Index> index;
    RealVector values;
    Matrix vectors;
  };

  static Vector phases(const RealVector& values, double dt) {
    Vector p(values.size());
    for (Index k = 0; k < values.size(); ++k) p(k) = std::polar(1.0, -values(k) * dt);
    return p;
  }

  static Matrix block_unitary(const Block& b, double dt) {
    return b.vectors * phases(b.values, dt).asDiagonal() * b.vectors.adjoint();
  }

  static Vector apply_block(const Block& b, double dt, const Vector& v) {
    return b.vectors * phases(b.values, dt).cwiseProduct(b.vectors.adjoint() * v);
  }

  Index dim_;
  std::vector<Block> blocks_;
};

inline EigenDecomposition eig_hermitian(const HermitianOperator& h) {
  return Spectrum(h).decomposition();
}

// exp(-i H dt), unitary.
inline Operator propagator(const HermitianOperator& h, double dt) {
  return Operator(Spectrum(h).propagator(dt));
}

// e^{iH(t-t0)} P e^{-iH(t-t0)}
inline Projector to_heisenberg(const Projector& p, const Spectrum& spectrum, double t, double t0) {
  require_same_dim(p.dim(), spectrum.dim(), "to_heisenberg");
  return Projector(spectrum.conjugate(-(t - t0), p.matrix()));
}

inline Projector to_heisenberg(const Projector& p, const HermitianOperator& h, double t, double t0) {
  return to_heisenberg(p, Spectrum(h), t, t0);
}

// e^{-iH(t-t0)} P e^{iH(t-t0)}
inline Projector to_schrodinger(const Projector& p, const Spectrum& spectrum, double t, double t0) {
  require_same_dim(p.dim(), spectrum.dim(), "to_schrodinger");
  return Projector(spectrum.conjugate(t - t0, p.matrix()));
}

inline Projector to_schrodinger(const Projector& p, const HermitianOperator& h, double t, double t0) {
  return to_schrodinger(p, Spectrum(h), t, t0);
}

// -sum p ln p with 0 ln 0 = 0; values in [-tolerance, 0) are clamped.
inline double entropy_of_spectrum(const RealVector& w, double tolerance = tol::herm) {
  double s = 0.0;
  for (Index i = 0; i < w.size(); ++i) {
    const double p = w(i);
    if (p < -tolerance) {
      throw Error(Errc::invalid_density_matrix,
                  "eigenvalue " + std::to_string(p) + " below clamp tolerance");
    }
    if (p > 0.0) s -= p * std::log(p);
  }
  return s;
}

// Von Neumann entropy in nats.
inline double entropy(const DensityMatrix& rho, double tolerance = tol::herm) {
  if (rho.is_pure()) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(rho.matrix(), Eigen::EigenvaluesOnly);
  return entropy_of_spectrum(es.eigenvalues(), tolerance);
}

namespace pauli {
inline Matrix identity() { return Matrix::Identity(2, 2); }
inline Matrix x() {
  Matrix m(2, 2);
  m << 0.0, 1.0, 1.0, 0.0;
  return m;
}
inline Matrix y() {
  Matrix m(2, 2);
  m << 0.0, cplx(0.0, -1.0), cplx(0.0, 1.0), 0.0;
  return m;
}
inline Matrix z() {
  Matrix m(2, 2);
  m << 1.0, 0.0, 0.0, -1.0;
  return m;
}
}  // namespace pauli

}  // namespace dhist
