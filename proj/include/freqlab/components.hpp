#pragma once

// Desk-scale structure of the infinite tensor product H^(x)inf for
// eventually-constant vector sequences: the equivalence relation that
// defines components, overlaps of product vectors in (log prefix, tail rate)
// form, and the countable product basis |psi;{i}> of a component.
//
// An infinite product prod_r |<phi_r|psi_r>| over eventually-constant
// sequences either persists (tails parallel, rate 0) or decays
// geometrically (rate log|<phi_tail|psi_tail>| < 0), so it is represented
// exactly without truncation.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "freqlab/errors.hpp"
#include "freqlab/hilbert.hpp"
#include "freqlab/measures.hpp"

namespace freqlab {

// Overlap magnitudes at or below this are treated as exact zeros.
inline constexpr double kZeroOverlap = 1e-14;

// Tails are parallel (same ray) when |<a|b>| is within kDerivedTol of 1.
inline bool same_ray(const PureState& a, const PureState& b) {
  return std::abs(std::abs(inner_product(a, b)) - 1.0) <= kDerivedTol;
}

// {i}: finitely many nonzero labels i_r in 1..D-1, all other copies 0.
class IndexSequence {
 public:
  IndexSequence() = default;

  explicit IndexSequence(std::map<std::size_t, std::size_t> nonzero)
      : entries_(std::move(nonzero)) {
    for (const auto& [r, i] : entries_) {
      if (i == 0) {
        throw PreconditionError("IndexSequence: listed entries must be nonzero (copy " +
                                std::to_string(r) + ")");
      }
    }
  }

  std::size_t at(std::size_t r) const {
    const auto it = entries_.find(r);
    return it == entries_.end() ? 0 : it->second;
  }

  // One past the last copy carrying a nonzero label.
  std::size_t support_end() const { return entries_.empty() ? 0 : entries_.rbegin()->first + 1; }

  std::size_t max_label() const {
    std::size_t m = 0;
    for (const auto& [r, i] : entries_) m = std::max(m, i);
    return m;
  }

  const std::map<std::size_t, std::size_t>& entries() const noexcept { return entries_; }

 private:
  std::map<std::size_t, std::size_t> entries_;
};

struct LogOverlap {
  double prefix_log = 0.0;  // sum of log|<a_r|b_r>| over the joint prefix, -inf on a zero factor
  double tail_rate = 0.0;   // log|<a_tail|b_tail>| per copy
  bool converges = true;

  double value() const { return converges ? std::exp(prefix_log) : 0.0; }
};

// Completion bases |psi_r,0>=|psi_r>, |psi_r,1>, ..., |psi_r,D-1>: greedy
// Gram-Schmidt against the computational basis.
inline Matrix completion_basis(const PureState& psi) { return complete_basis(psi.amplitudes()); }

class DecoratedSequence {
 public:
  DecoratedSequence(VectorSequence base, IndexSequence decoration)
      : base_(std::move(base)), decoration_(std::move(decoration)) {
    if (decoration_.max_label() >= base_.dim()) {
      throw IndexError("DecoratedSequence: decoration label exceeds D-1");
    }
    completions_.reserve(base_.prefix_length());
    for (const auto& s : base_.prefix()) completions_.push_back(completion_basis(s));
    tail_completion_ = completion_basis(base_.tail());
  }

  const VectorSequence& base() const noexcept { return base_; }
  const IndexSequence& decoration() const noexcept { return decoration_; }

  const Matrix& completion(std::size_t r) const {
    return r < completions_.size() ? completions_[r] : tail_completion_;
  }

  // |psi_r, i_r>
  Vector state(std::size_t r) const {
    return completion(r).col(static_cast<Eigen::Index>(decoration_.at(r)));
  }

 private:
  VectorSequence base_;
  IndexSequence decoration_;
  std::vector<Matrix> completions_;
  Matrix tail_completion_;
};

struct DecoratedInner {
  Complex value{0.0, 0.0};
  double magnitude = 0.0;
  bool equivalent = false;
};

struct CompletenessRecord {
  double partial_sum = 0.0;
  double bound = 0.0;
};

inline LogOverlap sequence_overlap(const VectorSequence& a, const VectorSequence& b) {
  if (a.dim() != b.dim()) throw DimensionError("sequence_overlap: dimensions differ");
  LogOverlap out;
  const std::size_t joint = std::max(a.prefix_length(), b.prefix_length());
  for (std::size_t r = 0; r < joint; ++r) {
    const double m = std::abs(inner_product(a.at(r), b.at(r)));
    if (m <= kZeroOverlap) {
      out.prefix_log = -std::numeric_limits<double>::infinity();
      break;
    }
    out.prefix_log += std::log(std::min(m, 1.0));
  }
  const double t = std::abs(inner_product(a.tail(), b.tail()));
  if (std::abs(t - 1.0) <= kDerivedTol) {
    out.tail_rate = 0.0;
  } else if (t <= kZeroOverlap) {
    out.tail_rate = -std::numeric_limits<double>::infinity();
  } else {
    out.tail_rate = std::log(t);
  }
  out.converges = out.tail_rate == 0.0 && std::isfinite(out.prefix_log);
  return out;
}

// Tails parallel up to phase. A finite prefix never matters: past it the
// product of overlaps is exactly 1.
inline bool equivalent(const VectorSequence& a, const VectorSequence& b) {
  if (a.dim() != b.dim()) return false;
  return same_ray(a.tail(), b.tail());
}

// <psi;{i}|{phi}> = prod_r <psi_r,i_r|phi_r>, with phi's tail rephased so
// the tail factors are 1.
inline DecoratedInner decorated_inner(const DecoratedSequence& d, const VectorSequence& phi) {
  if (d.base().dim() != phi.dim()) throw DimensionError("decorated_inner: dimensions differ");
  DecoratedInner out;
  if (!equivalent(d.base(), phi)) return out;
  out.equivalent = true;
  const std::size_t span = std::max({d.base().prefix_length(), phi.prefix_length(),
                                     d.decoration().support_end()});
  Complex value{1.0, 0.0};
  for (std::size_t r = 0; r < span; ++r) value *= d.state(r).dot(phi.at(r).amplitudes());
  out.value = value;
  out.magnitude = std::abs(value);
  return out;
}

// Sum of |<psi;{i}|{phi}>|^2 over decorations supported on copies
// 0..cutoff-1, by the per-copy factorization
//   prod_{r<cutoff} sum_i |<psi_r,i|phi_r>|^2  *  prod_{r>=cutoff} |<psi_r|phi_r>|^2.
// `bound` is the second factor.
inline CompletenessRecord completeness_check(const VectorSequence& base,
                                             const VectorSequence& phi, std::size_t cutoff) {
  if (base.dim() != phi.dim()) throw DimensionError("completeness_check: dimensions differ");
  if (!equivalent(base, phi)) {
    throw PreconditionError("completeness_check: sequences are not equivalent");
  }
  const std::size_t span = std::max(base.prefix_length(), phi.prefix_length());

  // Exactly 1 in exact arithmetic; clamped so rounding cannot compound past 1
  // over long cutoffs.
  auto copy_sum = [&](std::size_t r) {
    const Matrix c = completion_basis(base.at(r));
    return std::min((c.adjoint() * phi.at(r).amplitudes()).squaredNorm(), 1.0);
  };

  CompletenessRecord out;
  double head = 1.0;
  for (std::size_t r = 0; r < std::min(cutoff, span); ++r) head *= copy_sum(r);
  if (cutoff > span) head *= std::pow(copy_sum(span), static_cast<double>(cutoff - span));

  double bound = 1.0;
  for (std::size_t r = cutoff; r < span; ++r) bound *= std::norm(inner_product(base.at(r), phi.at(r)));
  out.bound = bound;
  out.partial_sum = head * bound;
  return out;
}

}  // namespace freqlab
