#pragma once

// Finite-copy frequency operator F^N for the selected outcome j = 0.
//
// Two kinds of dense evaluation live here. Operator matrices (projectors
// Pi_n^N and F^N itself) are built explicitly on the D^N space and are meant
// as brute-force oracles at small sizes. State-level quantities (F^N |Psi_N>,
// ||Pi_n^N |Psi_N>||^2) are evaluated on the dense D^N amplitude vector by
// applying single-copy operators leg by leg, which reaches much larger N.
// The analytic path (binomial law, q(1-q)/N) needs no tensor space at all.
//
// Copy r of a D^N vector is digit r of the base-D index, copy 0 most
// significant, matching the Kronecker product ordering.

#include <unsupported/Eigen/KroneckerProduct>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "freqlab/errors.hpp"
#include "freqlab/hilbert.hpp"

namespace freqlab {

// Largest D^N for which dense amplitude vectors are materialized.
inline constexpr std::size_t kDefaultStateCap = std::size_t{1} << 20;
// Largest D^N for which dense operator matrices are built (dim^2 complex entries).
inline constexpr std::size_t kDefaultOperatorCap = std::size_t{1} << 10;

struct TensorSpace {
  std::size_t D = 0;
  std::size_t N = 0;
  std::size_t total_dim = 0;

  // Throws ResourceError if D^N exceeds `cap`.
  static TensorSpace make(std::size_t D, std::size_t N, std::size_t cap) {
    if (D < 2) throw DimensionError("TensorSpace: single-copy dimension must be at least 2");
    if (N < 1) throw DimensionError("TensorSpace: copy count must be at least 1");
    std::size_t total = 1;
    for (std::size_t r = 0; r < N; ++r) {
      if (total > cap / D) {
        throw ResourceError("TensorSpace: D^N = " + std::to_string(D) + "^" + std::to_string(N) +
                                " exceeds the dense cap " + std::to_string(cap) +
                                "; use the analytic path or raise the cap",
                            std::numeric_limits<std::size_t>::max(), cap);
      }
      total *= D;
    }
    return TensorSpace{D, N, total};
  }

  static bool fits(std::size_t D, std::size_t N, std::size_t cap) {
    std::size_t total = 1;
    for (std::size_t r = 0; r < N; ++r) {
      if (total > cap / D) return false;
      total *= D;
    }
    return true;
  }
};

struct DenseOperator {
  Matrix matrix;
  TensorSpace space;

  double hermiticity_error() const { return (matrix - matrix.adjoint()).cwiseAbs().maxCoeff(); }
};

enum class FrequencyForm { spectral, averaged };
enum class ResidualMode { analytic, dense };

struct RepetitionState {
  PureState single;
  std::size_t N;
  std::optional<Vector> dense_amplitudes;
};

struct FHResult {
  double q = 0.0;
  std::size_t N = 0;
  double delta = 0.0;
  double delta_squared_analytic = 0.0;
};

namespace detail {

inline std::size_t ipow(std::size_t base, std::size_t exp) {
  std::size_t out = 1;
  for (std::size_t k = 0; k < exp; ++k) out *= base;
  return out;
}

// Number of zero digits in the base-D expansion of `index` (N digits).
inline std::size_t zero_digits(std::size_t index, std::size_t D, std::size_t N) {
  std::size_t zeros = 0;
  for (std::size_t r = 0; r < N; ++r) {
    if (index % D == 0) ++zeros;
    index /= D;
  }
  return zeros;
}

inline Matrix selected_projector(const Observable& obs) {
  const auto b0 = obs.column(0);
  return b0 * b0.adjoint();
}

// v <- (1 x .. x M x .. x 1) v with M on copy r.
inline void apply_on_copy(Vector& v, const Matrix& m, std::size_t D, std::size_t N,
                          std::size_t r) {
  const std::size_t stride = ipow(D, N - 1 - r);
  const std::size_t outer = ipow(D, r);
  const auto d = static_cast<Eigen::Index>(D);
  Vector slice(d);
  for (std::size_t o = 0; o < outer; ++o) {
    const std::size_t base = o * D * stride;
    for (std::size_t s = 0; s < stride; ++s) {
      for (Eigen::Index k = 0; k < d; ++k) {
        slice(k) = v(static_cast<Eigen::Index>(base + static_cast<std::size_t>(k) * stride + s));
      }
      const Vector mapped = m * slice;
      for (Eigen::Index k = 0; k < d; ++k) {
        v(static_cast<Eigen::Index>(base + static_cast<std::size_t>(k) * stride + s)) = mapped(k);
      }
    }
  }
}

inline Vector kron_power(const Vector& v, std::size_t N) {
  Vector out = v;
  for (std::size_t r = 1; r < N; ++r) {
    Vector next = Eigen::kroneckerProduct(out, v).eval();
    out = std::move(next);
  }
  return out;
}

inline void check_dense_vector(const Vector& v, const Observable& obs, std::size_t N) {
  if (static_cast<std::size_t>(v.size()) != ipow(obs.dim(), N)) {
    throw DimensionError("dense vector length does not equal D^N");
  }
}

}  // namespace detail

// All Pi_n^N, n = 0..N, built by appending one copy at a time:
// Pi_n^{k+1} = Pi_{n-1}^k x P_0 + Pi_n^k x P_1.
inline std::vector<DenseOperator> frequency_projectors(const Observable& obs, std::size_t N,
                                                       std::size_t cap = kDefaultOperatorCap) {
  const TensorSpace space = TensorSpace::make(obs.dim(), N, cap);
  const auto d = static_cast<Eigen::Index>(obs.dim());
  const Matrix p0 = detail::selected_projector(obs);
  const Matrix p1 = Matrix::Identity(d, d) - p0;

  std::vector<Matrix> level{p1, p0};  // one copy: n = 0, 1
  for (std::size_t k = 1; k < N; ++k) {
    std::vector<Matrix> next(k + 2);
    for (std::size_t n = 0; n <= k + 1; ++n) {
      const auto rows = level.front().rows() * d;
      Matrix acc = Matrix::Zero(rows, rows);
      if (n >= 1) acc += Eigen::kroneckerProduct(level[n - 1], p0);
      if (n <= k) acc += Eigen::kroneckerProduct(level[n], p1);
      next[n] = std::move(acc);
    }
    level = std::move(next);
  }
  std::vector<DenseOperator> out;
  out.reserve(level.size());
  for (auto& m : level) out.push_back(DenseOperator{std::move(m), space});
  return out;
}

inline DenseOperator frequency_projector(const Observable& obs, std::size_t N, std::size_t n,
                                         std::size_t cap = kDefaultOperatorCap) {
  if (n > N) {
    throw IndexError("frequency_projector: occurrence count " + std::to_string(n) +
                     " exceeds N=" + std::to_string(N));
  }
  auto all = frequency_projectors(obs, N, cap);
  return std::move(all[n]);
}

// spectral: sum_n (n/N) Pi_n^N.  averaged: (1/N) sum_r P_0 on copy r.
inline DenseOperator frequency_operator_dense(const Observable& obs, std::size_t N,
                                              FrequencyForm form,
                                              std::size_t cap = kDefaultOperatorCap) {
  const TensorSpace space = TensorSpace::make(obs.dim(), N, cap);
  const auto total = static_cast<Eigen::Index>(space.total_dim);
  Matrix f = Matrix::Zero(total, total);
  const double inv_n = 1.0 / static_cast<double>(N);

  if (form == FrequencyForm::spectral) {
    const auto projectors = frequency_projectors(obs, N, cap);
    for (std::size_t n = 1; n <= N; ++n) {
      f += (static_cast<double>(n) * inv_n) * projectors[n].matrix;
    }
  } else {
    const Matrix p0 = detail::selected_projector(obs);
    for (std::size_t r = 0; r < N; ++r) {
      const auto left = static_cast<Eigen::Index>(detail::ipow(obs.dim(), r));
      const auto right = static_cast<Eigen::Index>(detail::ipow(obs.dim(), N - 1 - r));
      const Matrix lhs = Eigen::kroneckerProduct(Matrix::Identity(left, left), p0).eval();
      f += Eigen::kroneckerProduct(lhs, Matrix::Identity(right, right)).eval();
    }
    f *= inv_n;
  }
  return DenseOperator{std::move(f), space};
}

inline RepetitionState repetition_state(const PureState& psi, std::size_t N, bool materialize,
                                        std::size_t cap = kDefaultStateCap) {
  if (N < 1) throw DimensionError("repetition_state: copy count must be at least 1");
  RepetitionState out{psi, N, std::nullopt};
  if (materialize) {
    TensorSpace::make(psi.dim(), N, cap);
    out.dense_amplitudes = detail::kron_power(psi.amplitudes(), N);
  }
  return out;
}

// F^N v on a dense D^N vector, from the per-copy average (1/N) sum_r P_0^r.
inline Vector apply_frequency_operator(const Observable& obs, std::size_t N, const Vector& v) {
  detail::check_dense_vector(v, obs, N);
  const Matrix p0 = detail::selected_projector(obs);
  Vector acc = Vector::Zero(v.size());
  for (std::size_t r = 0; r < N; ++r) {
    Vector term = v;
    detail::apply_on_copy(term, p0, obs.dim(), N, r);
    acc += term;
  }
  return acc / static_cast<double>(N);
}

// Coefficients of v in the product eigenbasis |B,j_1>...|B,j_N>.
inline Vector to_product_basis(const Observable& obs, std::size_t N, const Vector& v) {
  detail::check_dense_vector(v, obs, N);
  const Matrix u_dag = obs.eigenvectors().adjoint();
  Vector c = v;
  for (std::size_t r = 0; r < N; ++r) detail::apply_on_copy(c, u_dag, obs.dim(), N, r);
  return c;
}

// Pi_n^N v on a dense vector: rotate to the product eigenbasis, keep the
// outcome strings with exactly n zeros, rotate back.
inline Vector apply_frequency_projector(const Observable& obs, std::size_t N, std::size_t n,
                                        const Vector& v) {
  if (n > N) throw IndexError("apply_frequency_projector: n exceeds N");
  Vector c = to_product_basis(obs, N, v);
  for (Eigen::Index i = 0; i < c.size(); ++i) {
    if (detail::zero_digits(static_cast<std::size_t>(i), obs.dim(), N) != n) c(i) = 0.0;
  }
  const Matrix& u = obs.eigenvectors();
  for (std::size_t r = 0; r < N; ++r) detail::apply_on_copy(c, u, obs.dim(), N, r);
  return c;
}

// ||Pi_n^N v||^2 for n = 0..N, evaluated on the dense vector.
inline std::vector<double> frequency_weights_dense(const Observable& obs, std::size_t N,
                                                   const Vector& v) {
  const Vector c = to_product_basis(obs, N, v);
  std::vector<double> w(N + 1, 0.0);
  for (Eigen::Index i = 0; i < c.size(); ++i) {
    w[detail::zero_digits(static_cast<std::size_t>(i), obs.dim(), N)] += std::norm(c(i));
  }
  return w;
}

// Binomial law C(N,n) q^n (1-q)^(N-n), n = 0..N.
//
// Log-probabilities are accumulated outward from the mode with the ratio
// log p(n+1) - log p(n) = log((N-n)/(n+1)) + log(q/(1-q)), exponentiated
// relative to the mode and normalized, which stays finite and accurate up to
// N ~ 1e6 and beyond.
inline std::vector<double> frequency_distribution(double q, std::size_t N) {
  if (!(q >= 0.0 && q <= 1.0)) throw PreconditionError("frequency_distribution: q outside [0,1]");
  if (N < 1) throw PreconditionError("frequency_distribution: N must be at least 1");
  std::vector<double> p(N + 1, 0.0);
  if (q == 0.0) {
    p.front() = 1.0;
    return p;
  }
  if (q == 1.0) {
    p.back() = 1.0;
    return p;
  }
  const double log_odds = std::log(q) - std::log1p(-q);
  const auto mode = static_cast<std::size_t>(
      std::clamp(std::floor(static_cast<double>(N + 1) * q), 0.0, static_cast<double>(N)));

  std::vector<double> logp(N + 1, 0.0);
  for (std::size_t n = mode; n < N; ++n) {
    logp[n + 1] = logp[n] + std::log(static_cast<double>(N - n) / static_cast<double>(n + 1)) +
                  log_odds;
  }
  for (std::size_t n = mode; n > 0; --n) {
    logp[n - 1] = logp[n] - std::log(static_cast<double>(N - n + 1) / static_cast<double>(n)) -
                  log_odds;
  }
  long double total = 0.0L;
  for (std::size_t n = 0; n <= N; ++n) {
    p[n] = std::exp(logp[n]);
    total += p[n];
  }
  for (auto& x : p) x = static_cast<double>(x / total);
  return p;
}

// ||F^N|Psi_N> - q'|Psi_N>|| for a trial value q'. Analytic mode uses
// sqrt((q' - p)^2 + p(1-p)/N) with p = <psi|P_0|psi>; dense mode applies F^N
// to the materialized repetition state.
inline double fh_residual_trial(const PureState& psi, const Observable& obs, std::size_t N,
                                double trial_q, ResidualMode mode,
                                std::size_t cap = kDefaultStateCap) {
  if (N < 1) throw PreconditionError("fh_residual: N must be at least 1");
  if (mode == ResidualMode::analytic) {
    const double p = born_weight(psi, obs, 0);
    const double bias = trial_q - p;
    return std::sqrt(bias * bias + p * (1.0 - p) / static_cast<double>(N));
  }
  const RepetitionState rep = repetition_state(psi, N, true, cap);
  const Vector& v = *rep.dense_amplitudes;
  return (apply_frequency_operator(obs, N, v) - trial_q * v).norm();
}

inline FHResult fh_residual(const PureState& psi, const Observable& obs, std::size_t N,
                            ResidualMode mode, std::size_t cap = kDefaultStateCap) {
  FHResult out;
  out.q = born_weight(psi, obs, 0);
  out.N = N;
  out.delta_squared_analytic = out.q * (1.0 - out.q) / static_cast<double>(N);
  out.delta = fh_residual_trial(psi, obs, N, out.q, mode, cap);
  return out;
}

// max_n ||Pi_n^N |Psi_N>||^2 = largest binomial term.
inline double squires_max_overlap(double q, std::size_t N) {
  const auto p = frequency_distribution(q, N);
  return *std::max_element(p.begin(), p.end());
}

// Least-squares slope of log(y) against log(x).
inline double fit_loglog_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw PreconditionError("fit_loglog_slope: need at least two paired points");
  }
  const auto n = static_cast<double>(x.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0 && y[i] > 0.0)) {
      throw PreconditionError("fit_loglog_slope: values must be positive");
    }
    const double lx = std::log(x[i]);
    const double ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace freqlab
