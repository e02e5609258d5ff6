#pragma once

// Single-copy Hilbert space: pure states, nondegenerate observables, Born
// weights and Haar-random generation of states and bases.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "freqlab/errors.hpp"
#include "freqlab/random.hpp"

namespace freqlab {

using Complex = std::complex<double>;
using Vector = Eigen::VectorXcd;
using Matrix = Eigen::MatrixXcd;
using RealVector = Eigen::VectorXd;

// Construction-time invariants.
inline constexpr double kConstructionTol = 1e-12;
// Assertions on derived quantities.
inline constexpr double kDerivedTol = 1e-10;

inline std::size_t dim_of(const Vector& v) { return static_cast<std::size_t>(v.size()); }

class PureState {
 public:
  // Takes amplitudes that are already unit-norm.
  explicit PureState(Vector amplitudes) : amp_(std::move(amplitudes)) {
    if (amp_.size() < 2) {
      throw DimensionError("PureState: dimension must be at least 2, got " +
                           std::to_string(amp_.size()));
    }
    const double norm = amp_.norm();
    if (!std::isfinite(norm) || std::abs(norm - 1.0) > kConstructionTol) {
      throw PreconditionError("PureState: amplitudes are not unit-norm (norm " +
                              std::to_string(norm) + ")");
    }
  }

  static PureState normalized(Vector v) {
    const double norm = v.norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) {
      throw PreconditionError("PureState: cannot normalize a zero or non-finite vector");
    }
    v /= norm;
    return PureState(std::move(v));
  }

  static PureState basis(std::size_t dim, std::size_t j) {
    if (j >= dim) {
      throw IndexError("PureState::basis: index " + std::to_string(j) + " out of range for D=" +
                       std::to_string(dim));
    }
    Vector v = Vector::Zero(static_cast<Eigen::Index>(dim));
    v(static_cast<Eigen::Index>(j)) = 1.0;
    return PureState(std::move(v));
  }

  static PureState uniform(std::size_t dim) {
    Vector v = Vector::Constant(static_cast<Eigen::Index>(dim),
                                Complex(1.0 / std::sqrt(static_cast<double>(dim)), 0.0));
    return normalized(std::move(v));
  }

  // Real nonnegative amplitudes sqrt(p_j); p is renormalized.
  static PureState from_weights(std::span<const double> weights) {
    Vector v(static_cast<Eigen::Index>(weights.size()));
    for (std::size_t j = 0; j < weights.size(); ++j) {
      if (weights[j] < 0.0) throw PreconditionError("PureState::from_weights: negative weight");
      v(static_cast<Eigen::Index>(j)) = std::sqrt(weights[j]);
    }
    return normalized(std::move(v));
  }

  // Qubit state (sqrt(q), sqrt(1-q)) whose Born weight on the first basis vector is q.
  static PureState from_born_weight(double q) {
    if (!(q >= 0.0 && q <= 1.0)) {
      throw PreconditionError("PureState::from_born_weight: q must lie in [0,1]");
    }
    Vector v(2);
    v << std::sqrt(q), std::sqrt(1.0 - q);
    return normalized(std::move(v));
  }

  const Vector& amplitudes() const noexcept { return amp_; }
  std::size_t dim() const noexcept { return dim_of(amp_); }
  Complex operator[](std::size_t j) const { return amp_(static_cast<Eigen::Index>(j)); }

 private:
  Vector amp_;
};

// Nondegenerate observable B with eigenvectors |B,j> stored as matrix columns.
class Observable {
 public:
  Observable(RealVector eigenvalues, Matrix eigenvectors)
      : values_(std::move(eigenvalues)), vectors_(std::move(eigenvectors)) {
    const auto d = vectors_.rows();
    if (d < 2 || vectors_.cols() != d || values_.size() != d) {
      throw DimensionError("Observable: need D>=2 eigenvalues and a DxD eigenvector matrix");
    }
    for (Eigen::Index a = 0; a < d; ++a) {
      for (Eigen::Index b = a + 1; b < d; ++b) {
        if (!(std::abs(values_(a) - values_(b)) > 0.0)) {
          throw PreconditionError("Observable: eigenvalues must be pairwise distinct");
        }
      }
    }
    const double gram_err =
        (vectors_.adjoint() * vectors_ - Matrix::Identity(d, d)).cwiseAbs().maxCoeff();
    if (!(gram_err <= kConstructionTol)) {
      throw PreconditionError("Observable: eigenvectors are not orthonormal (Gram error " +
                              std::to_string(gram_err) + ")");
    }
  }

  // Eigenvalues default to 0..D-1.
  static Observable from_basis(Matrix eigenvectors) {
    RealVector values(eigenvectors.cols());
    std::iota(values.begin(), values.end(), 0.0);
    return Observable(std::move(values), std::move(eigenvectors));
  }

  static Observable computational(std::size_t dim) {
    const auto d = static_cast<Eigen::Index>(dim);
    return from_basis(Matrix::Identity(d, d));
  }

  std::size_t dim() const noexcept { return static_cast<std::size_t>(vectors_.rows()); }
  const RealVector& eigenvalues() const noexcept { return values_; }
  const Matrix& eigenvectors() const noexcept { return vectors_; }

  auto column(std::size_t j) const {
    check_index(j);
    return vectors_.col(static_cast<Eigen::Index>(j));
  }

  PureState eigenvector(std::size_t j) const { return PureState(Vector(column(j))); }

  // Same observable with outcome j relabelled as outcome 0; the remaining
  // outcomes keep their relative order.
  Observable with_outcome_first(std::size_t j) const {
    check_index(j);
    const auto d = vectors_.cols();
    Matrix vecs(d, d);
    RealVector vals(d);
    vecs.col(0) = vectors_.col(static_cast<Eigen::Index>(j));
    vals(0) = values_(static_cast<Eigen::Index>(j));
    Eigen::Index k = 1;
    for (Eigen::Index c = 0; c < d; ++c) {
      if (c == static_cast<Eigen::Index>(j)) continue;
      vecs.col(k) = vectors_.col(c);
      vals(k) = values_(c);
      ++k;
    }
    return Observable(std::move(vals), std::move(vecs));
  }

 private:
  void check_index(std::size_t j) const {
    if (j >= dim()) {
      throw IndexError("Observable: outcome index " + std::to_string(j) + " out of range for D=" +
                       std::to_string(dim()));
    }
  }

  RealVector values_;
  Matrix vectors_;
};

// <a|b>, conjugate-linear in a.
inline Complex inner_product(const PureState& a, const PureState& b) {
  if (a.dim() != b.dim()) {
    throw DimensionError("inner_product: dimensions " + std::to_string(a.dim()) + " and " +
                         std::to_string(b.dim()) + " differ");
  }
  return a.amplitudes().dot(b.amplitudes());
}

inline double born_weight(const PureState& state, const Observable& obs, std::size_t j) {
  if (state.dim() != obs.dim()) {
    throw DimensionError("born_weight: state and observable dimensions differ");
  }
  return std::norm(obs.column(j).dot(state.amplitudes()));
}

inline std::vector<double> born_weights(const PureState& state, const Observable& obs) {
  std::vector<double> w(obs.dim());
  for (std::size_t j = 0; j < w.size(); ++j) w[j] = born_weight(state, obs, j);
  return w;
}

inline bool is_unitary(const Matrix& u, double tol = kDerivedTol) {
  if (u.rows() != u.cols() || u.rows() == 0) return false;
  return (u.adjoint() * u - Matrix::Identity(u.rows(), u.cols())).cwiseAbs().maxCoeff() <= tol;
}

// Haar-random DxD unitary: QR of a complex Gaussian matrix with the phases of
// diag(R) pushed back into Q.
inline Matrix random_unitary(std::size_t dim, RandomSource& rng) {
  if (dim < 1) throw DimensionError("random_unitary: dimension must be positive");
  const auto d = static_cast<Eigen::Index>(dim);
  Matrix g(d, d);
  for (Eigen::Index c = 0; c < d; ++c) {
    for (Eigen::Index r = 0; r < d; ++r) g(r, c) = rng.complex_normal();
  }
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(d, d);
  const Matrix& packed = qr.matrixQR();
  for (Eigen::Index k = 0; k < d; ++k) {
    const Complex r = packed(k, k);
    const double mag = std::abs(r);
    if (mag > 0.0) q.col(k) *= r / mag;
  }
  return q;
}

inline PureState random_state(std::size_t dim, RandomSource& rng) {
  if (dim < 2) {
    throw DimensionError("random_state: dimension must be at least 2, got " +
                         std::to_string(dim));
  }
  Vector v(static_cast<Eigen::Index>(dim));
  for (auto& a : v) a = rng.complex_normal();
  return PureState::normalized(std::move(v));
}

inline Observable random_basis(std::size_t dim, RandomSource& rng) {
  if (dim < 2) {
    throw DimensionError("random_basis: dimension must be at least 2, got " +
                         std::to_string(dim));
  }
  return Observable::from_basis(random_unitary(dim, rng));
}

// Orthonormal basis whose first column is first/|first|, completed by greedy
// Gram-Schmidt over the columns of `reference` (largest residual wins, two
// orthogonalization passes). Deterministic in its inputs.
inline Matrix complete_basis(const Vector& first, const Matrix& reference) {
  const auto d = first.size();
  if (reference.rows() != d || reference.cols() < d - 1) {
    throw DimensionError("complete_basis: reference basis does not match the vector dimension");
  }
  const double norm = first.norm();
  if (!(norm > 0.0)) throw PreconditionError("complete_basis: zero seed vector");

  Matrix out(d, d);
  out.col(0) = first / norm;
  std::vector<bool> used(static_cast<std::size_t>(reference.cols()), false);
  for (Eigen::Index k = 1; k < d; ++k) {
    Eigen::Index best = -1;
    double best_norm = -1.0;
    Vector best_vec;
    for (Eigen::Index c = 0; c < reference.cols(); ++c) {
      if (used[static_cast<std::size_t>(c)]) continue;
      Vector r = reference.col(c);
      for (int pass = 0; pass < 2; ++pass) {
        for (Eigen::Index b = 0; b < k; ++b) r -= out.col(b) * out.col(b).dot(r);
      }
      const double rn = r.norm();
      if (rn > best_norm) {
        best_norm = rn;
        best = c;
        best_vec = std::move(r);
      }
    }
    if (best < 0 || !(best_norm > 1e-8)) {
      throw ConsistencyError("complete_basis: reference columns do not span the complement");
    }
    used[static_cast<std::size_t>(best)] = true;
    out.col(k) = best_vec / best_norm;
  }
  return out;
}

inline Matrix complete_basis(const Vector& first) {
  return complete_basis(first, Matrix::Identity(first.size(), first.size()));
}

// New context sharing |B,shared_j> with obs. `rotation` is a (D-1)x(D-1)
// unitary acting on the other eigenvectors, taken in ascending index order:
// the k-th new complement vector is sum_m rotation(m,k) |c_m>. The shared
// vector keeps its slot, the rotated complement fills the remaining slots in
// order, and eigenvalues are carried over slot by slot.
inline Observable complement_rotation(const Observable& obs, std::size_t shared_j,
                                      const Matrix& rotation) {
  const auto d = static_cast<Eigen::Index>(obs.dim());
  if (shared_j >= obs.dim()) {
    throw IndexError("complement_rotation: shared index out of range");
  }
  if (rotation.rows() != d - 1 || rotation.cols() != d - 1) {
    throw DimensionError("complement_rotation: rotation must be (D-1)x(D-1)");
  }
  if (!is_unitary(rotation)) {
    throw PreconditionError("complement_rotation: rotation is not unitary");
  }
  const auto shared = static_cast<Eigen::Index>(shared_j);
  Matrix complement(d, d - 1);
  for (Eigen::Index c = 0, k = 0; c < d; ++c) {
    if (c != shared) complement.col(k++) = obs.eigenvectors().col(c);
  }
  const Matrix rotated = complement * rotation;
  Matrix vecs(d, d);
  vecs.col(shared) = obs.eigenvectors().col(shared);
  for (Eigen::Index c = 0, k = 0; c < d; ++c) {
    if (c != shared) vecs.col(c) = rotated.col(k++);
  }
  // Re-orthonormalize against round-off so the result meets the 1e-12 invariant.
  Eigen::HouseholderQR<Matrix> qr(vecs);
  Matrix q = qr.householderQ() * Matrix::Identity(d, d);
  for (Eigen::Index k = 0; k < d; ++k) {
    const Complex phase = q.col(k).dot(vecs.col(k));
    q.col(k) *= phase / std::abs(phase);
  }
  if ((q - vecs).cwiseAbs().maxCoeff() > kDerivedTol) {
    throw ConsistencyError("complement_rotation: rotated basis drifted from orthonormality");
  }
  q.col(shared) = obs.eigenvectors().col(shared);
  return Observable(obs.eigenvalues(), std::move(q));
}

// Complement rotation whose first new complement vector is the normalized
// projection of `state` onto the complement of |B,shared_j>. The state then
// has zero overlap with every other complement vector. Identity when the
// projection vanishes.
inline Matrix complement_alignment(const Observable& obs, std::size_t shared_j,
                                   const PureState& state) {
  if (state.dim() != obs.dim()) {
    throw DimensionError("complement_alignment: state and observable dimensions differ");
  }
  const auto d = static_cast<Eigen::Index>(obs.dim());
  if (shared_j >= obs.dim()) throw IndexError("complement_alignment: shared index out of range");
  Vector coords(d - 1);
  for (Eigen::Index c = 0, k = 0; c < d; ++c) {
    if (c != static_cast<Eigen::Index>(shared_j)) {
      coords(k++) = obs.eigenvectors().col(c).dot(state.amplitudes());
    }
  }
  if (coords.norm() < kConstructionTol) return Matrix::Identity(d - 1, d - 1);
  return complete_basis(coords);
}

}  // namespace freqlab
