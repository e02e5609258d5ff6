#pragma once

// Frame functions on a single copy. A candidate rule assigns a weight to the
// selected eigenvector of every measurement context; the audits check that
// weights sum to 1 on every basis and that the weight of a shared eigenvector
// is the same in every context containing it. Noncontextual candidates in
// D >= 3 must be of the form <v|rho|v>; fit_density recovers that rho by a
// trace-constrained linear least-squares fit.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "freqlab/errors.hpp"
#include "freqlab/hilbert.hpp"
#include "freqlab/measures.hpp"
#include "freqlab/random.hpp"

namespace freqlab {

class DensityOperator {
 public:
  explicit DensityOperator(Matrix m) : rho_(std::move(m)) {
    if (rho_.rows() < 2 || rho_.rows() != rho_.cols()) {
      throw DimensionError("DensityOperator: need a square matrix with D >= 2");
    }
    const double herm = (rho_ - rho_.adjoint()).cwiseAbs().maxCoeff();
    if (!(herm <= kConstructionTol)) {
      throw PreconditionError("DensityOperator: matrix is not Hermitian (error " +
                              std::to_string(herm) + ")");
    }
    const double tr = rho_.trace().real();
    if (!(std::abs(tr - 1.0) <= kConstructionTol)) {
      throw PreconditionError("DensityOperator: trace is " + std::to_string(tr) + ", not 1");
    }
    const double lo = min_eigenvalue(rho_);
    if (!(lo >= -kDerivedTol)) {
      throw PreconditionError("DensityOperator: negative eigenvalue " + std::to_string(lo));
    }
  }

  static DensityOperator maximally_mixed(std::size_t dim) {
    const auto d = static_cast<Eigen::Index>(dim);
    return DensityOperator(Matrix::Identity(d, d) / static_cast<double>(dim));
  }

  static DensityOperator diagonal(std::span<const double> probs) {
    Matrix m = Matrix::Zero(static_cast<Eigen::Index>(probs.size()),
                            static_cast<Eigen::Index>(probs.size()));
    for (std::size_t k = 0; k < probs.size(); ++k) m(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k)) = probs[k];
    return DensityOperator(std::move(m));
  }

  static DensityOperator pure(const PureState& s) {
    Matrix m = s.amplitudes() * s.amplitudes().adjoint();
    return DensityOperator(hermitize(m) / m.trace().real());
  }

  // G G^dagger / tr(G G^dagger) for a complex Gaussian G (full rank a.s.).
  static DensityOperator random(std::size_t dim, RandomSource& rng) {
    const auto d = static_cast<Eigen::Index>(dim);
    Matrix g(d, d);
    for (auto& z : g.reshaped()) z = rng.complex_normal();
    Matrix m = hermitize(g * g.adjoint());
    return DensityOperator(m / m.trace().real());
  }

  static double min_eigenvalue(const Matrix& hermitian) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(hermitian, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
  }

  static Matrix hermitize(const Matrix& m) { return (m + m.adjoint()) / 2.0; }

  const Matrix& matrix() const noexcept { return rho_; }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(rho_.rows()); }

  template <typename Derived>
  double expectation(const Eigen::MatrixBase<Derived>& v) const {
    return std::real(v.dot(rho_ * v));
  }

 private:
  Matrix rho_;
};

// Candidate rule q(j'; {|B,j>}) for the weight of outcome j' in context B.
class FrameCandidate {
 public:
  struct Born {
    DensityOperator rho;
  };
  struct GRule {
    GMeasure g;
    PureState state;
  };

  static FrameCandidate born(DensityOperator rho) { return FrameCandidate(Born{std::move(rho)}); }
  static FrameCandidate gmeasure(GMeasure g, PureState state) {
    return FrameCandidate(GRule{std::move(g), std::move(state)});
  }

  std::size_t dim() const {
    if (const auto* b = std::get_if<Born>(&impl_)) return b->rho.dim();
    return std::get<GRule>(impl_).state.dim();
  }

  double weight(const Observable& context, std::size_t j) const {
    check_context(context);
    if (const auto* b = std::get_if<Born>(&impl_)) return b->rho.expectation(context.column(j));
    const auto& r = std::get<GRule>(impl_);
    return outcome_probs(r.state, context, r.g).weights.at(j);
  }

  std::vector<double> weights(const Observable& context) const {
    check_context(context);
    if (const auto* r = std::get_if<GRule>(&impl_)) {
      return outcome_probs(r->state, context, r->g).weights;
    }
    std::vector<double> w(context.dim());
    for (std::size_t j = 0; j < w.size(); ++j) w[j] = weight(context, j);
    return w;
  }

  // State used to build the deterministic witness pair of contexts.
  PureState reference_state() const {
    if (const auto* r = std::get_if<GRule>(&impl_)) return r->state;
    return PureState::uniform(dim());
  }

  const std::variant<Born, GRule>& kind() const noexcept { return impl_; }

 private:
  explicit FrameCandidate(std::variant<Born, GRule> impl) : impl_(std::move(impl)) {}

  void check_context(const Observable& context) const {
    if (context.dim() != dim()) {
      throw DimensionError("FrameCandidate: context dimension does not match the candidate");
    }
  }

  std::variant<Born, GRule> impl_;
};

struct FrameAudit {
  double max_sum_deviation = 0.0;
  double max_context_deviation = 0.0;
  std::size_t bases_tested = 0;
};

struct FrameSample {
  Vector vector;
  double weight = 0.0;
};

struct DensityFit {
  Matrix estimate;                      // Hermitian, unit trace
  double residual = 0.0;                // RMS of <v_k|estimate|v_k> - weight_k
  double min_eigenvalue = 0.0;
  std::optional<DensityOperator> rho;   // set when the estimate is a valid density operator
};

inline void check_candidate_dim(const FrameCandidate& c, std::size_t D) {
  if (c.dim() != D) {
    throw DimensionError("frame audit: candidate dimension " + std::to_string(c.dim()) +
                         " does not match D=" + std::to_string(D));
  }
}

// Worst |sum_j q(j; B) - 1| over Haar-random bases; basis t uses rng.fork(t).
inline FrameAudit frame_sum_audit(const FrameCandidate& candidate, std::size_t D,
                                  std::size_t num_bases, const RandomSource& rng) {
  if (D < 2) throw DimensionError("frame_sum_audit: D must be at least 2");
  check_candidate_dim(candidate, D);
  FrameAudit audit;
  for (std::size_t t = 0; t < num_bases; ++t) {
    RandomSource stream = rng.fork(t);
    const Observable basis = random_basis(D, stream);
    const auto w = candidate.weights(basis);
    double sum = 0.0;
    for (double x : w) sum += x;
    audit.max_sum_deviation = std::max(audit.max_sum_deviation, std::abs(sum - 1.0));
  }
  audit.bases_tested = num_bases;
  return audit;
}

// Random pair of contexts sharing a random unit vector v (slot 0 in both).
inline ContextPair random_context_pair(std::size_t D, RandomSource& rng) {
  const PureState v = random_state(D, rng);
  const Matrix frame = random_unitary(D, rng);
  Observable a = Observable::from_basis(complete_basis(v.amplitudes(), frame));
  Observable b = complement_rotation(a, 0, random_unitary(D - 1, rng));
  return ContextPair{std::move(a), std::move(b), 0, 0};
}

// Worst |q(v; A) - q(v; B)| over pairs of contexts sharing v. Pair t uses
// rng.fork(t); the deterministic witness built from the candidate's
// reference state is added when include_witness is set.
inline FrameAudit noncontextuality_audit(const FrameCandidate& candidate, std::size_t D,
                                         std::size_t num_pairs, const RandomSource& rng,
                                         bool include_witness = true) {
  if (D < 3) {
    throw DimensionError(
        "noncontextuality_audit: unsupported dimension D=" + std::to_string(D) +
        "; for D=2 a shared eigenvector fixes the other one up to phase, so distinct contexts "
        "cannot exist");
  }
  check_candidate_dim(candidate, D);
  FrameAudit audit;
  auto probe = [&](const ContextPair& p) {
    const double qa = candidate.weight(p.a, p.shared_a);
    const double qb = candidate.weight(p.b, p.shared_b);
    audit.max_context_deviation = std::max(audit.max_context_deviation, std::abs(qa - qb));
    ++audit.bases_tested;
  };
  if (include_witness) probe(contextuality_witness(candidate.reference_state()));
  for (std::size_t t = 0; t < num_pairs; ++t) {
    RandomSource stream = rng.fork(t);
    probe(random_context_pair(D, stream));
  }
  return audit;
}

// Every vector of num_bases Haar-random bases, weighted by the candidate.
inline std::vector<FrameSample> frame_samples(const FrameCandidate& candidate,
                                              std::size_t num_bases, const RandomSource& rng) {
  const std::size_t D = candidate.dim();
  std::vector<FrameSample> out;
  out.reserve(num_bases * D);
  for (std::size_t t = 0; t < num_bases; ++t) {
    RandomSource stream = rng.fork(t);
    const Observable basis = random_basis(D, stream);
    const auto w = candidate.weights(basis);
    for (std::size_t j = 0; j < D; ++j) out.push_back(FrameSample{Vector(basis.column(j)), w[j]});
  }
  return out;
}

namespace detail {

// Real coordinates of a Hermitian matrix: D diagonal entries, then the real
// and imaginary parts of each upper-triangle entry.
inline std::size_t hermitian_params(std::size_t D) { return D * D; }

inline Eigen::RowVectorXd expectation_row(const Vector& v) {
  const auto d = v.size();
  Eigen::RowVectorXd row(d * d);
  Eigen::Index c = 0;
  for (Eigen::Index k = 0; k < d; ++k) row(c++) = std::norm(v(k));
  for (Eigen::Index k = 0; k < d; ++k) {
    for (Eigen::Index l = k + 1; l < d; ++l) {
      const Complex z = std::conj(v(k)) * v(l);
      row(c++) = 2.0 * z.real();
      row(c++) = -2.0 * z.imag();
    }
  }
  return row;
}

inline Matrix hermitian_from_params(const Eigen::VectorXd& x, Eigen::Index d) {
  Matrix h = Matrix::Zero(d, d);
  Eigen::Index c = 0;
  for (Eigen::Index k = 0; k < d; ++k) h(k, k) = x(c++);
  for (Eigen::Index k = 0; k < d; ++k) {
    for (Eigen::Index l = k + 1; l < d; ++l) {
      const Complex z(x(c), x(c + 1));
      c += 2;
      h(k, l) = z;
      h(l, k) = std::conj(z);
    }
  }
  return h;
}

}  // namespace detail

// Least squares for weight_k = <v_k|rho|v_k> over Hermitian rho subject to
// tr rho = 1, solved through the KKT system of the Lagrangian.
inline DensityFit fit_density(std::span<const FrameSample> samples, std::size_t D) {
  if (D < 2) throw DimensionError("fit_density: D must be at least 2");
  const auto p = static_cast<Eigen::Index>(detail::hermitian_params(D));
  const auto k = static_cast<Eigen::Index>(samples.size());
  Eigen::MatrixXd a(k, p);
  Eigen::VectorXd b(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    const auto& s = samples[static_cast<std::size_t>(i)];
    if (dim_of(s.vector) != D) throw DimensionError("fit_density: sample vector has wrong dimension");
    if (std::abs(s.vector.norm() - 1.0) > kDerivedTol) {
      throw PreconditionError("fit_density: sample vectors must be unit vectors");
    }
    if (!(s.weight >= 0.0 && s.weight <= 1.0)) {
      throw PreconditionError("fit_density: sample weights must lie in [0,1]");
    }
    a.row(i) = detail::expectation_row(s.vector);
    b(i) = s.weight;
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> rank_qr(a);
  rank_qr.setThreshold(1e-10);
  const auto rank = static_cast<std::size_t>(rank_qr.rank());
  if (rank < static_cast<std::size_t>(p)) {
    throw UnderdeterminedError("fit_density: sample projectors span only rank " +
                                   std::to_string(rank) + " of the " + std::to_string(p) +
                                   "-dimensional Hermitian space",
                               rank, static_cast<std::size_t>(p));
  }

  Eigen::VectorXd trace_row = Eigen::VectorXd::Zero(p);
  trace_row.head(static_cast<Eigen::Index>(D)).setOnes();

  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(p + 1, p + 1);
  kkt.topLeftCorner(p, p) = a.transpose() * a;
  kkt.topRightCorner(p, 1) = trace_row;
  kkt.bottomLeftCorner(1, p) = trace_row.transpose();
  Eigen::VectorXd rhs(p + 1);
  rhs.head(p) = a.transpose() * b;
  rhs(p) = 1.0;
  const Eigen::VectorXd sol = kkt.colPivHouseholderQr().solve(rhs);
  const Eigen::VectorXd x = sol.head(p);

  DensityFit fit;
  fit.estimate = detail::hermitian_from_params(x, static_cast<Eigen::Index>(D));
  fit.residual = k > 0 ? std::sqrt((a * x - b).squaredNorm() / static_cast<double>(k)) : 0.0;
  fit.min_eigenvalue = DensityOperator::min_eigenvalue(fit.estimate);
  try {
    fit.rho.emplace(fit.estimate);
  } catch (const PreconditionError&) {
    fit.rho.reset();
  }
  return fit;
}

}  // namespace freqlab
