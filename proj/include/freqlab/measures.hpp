#pragma once

// Probability measures on infinite outcome sequences of repeated B
// measurements, built as products of per-copy weights
//
//   q_r(j) = g(|<psi_r|B,j>|) / N_r,   N_r = sum_j g(|<psi_r|B,j>|),
//
// for a function g on [0,1] with g(0) = 0 and g(1) = 1. g(x) = x^2 is the
// Born measure. The limiting frequency of outcome j under such a measure is
// a tail property, so for eventually-constant vector sequences it is simply
// the tail weight.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <thread>
#include <utility>
#include <variant>
#include <vector>

#include "freqlab/errors.hpp"
#include "freqlab/hilbert.hpp"
#include "freqlab/random.hpp"

namespace freqlab {

class GMeasure {
 public:
  struct Power {
    double exponent;
  };
  // Piecewise-linear interpolation through (x, y) knots.
  struct Table {
    std::vector<double> x;
    std::vector<double> y;
  };

  static GMeasure power(double p) {
    if (!(p >= 1.0) || !std::isfinite(p)) {
      throw PreconditionError("GMeasure::power: exponent must be a finite value >= 1");
    }
    return GMeasure(Power{p});
  }

  static GMeasure born() { return power(2.0); }

  // Knots must start at (0,0), end at (1,1), have strictly increasing x and
  // nondecreasing y.
  static GMeasure table(std::vector<double> x, std::vector<double> y) {
    if (x.size() != y.size() || x.size() < 2) {
      throw PreconditionError("GMeasure::table: need at least two (x, y) knots");
    }
    for (std::size_t k = 1; k < x.size(); ++k) {
      if (!(x[k] > x[k - 1])) throw PreconditionError("GMeasure::table: x must increase strictly");
      if (y[k] < y[k - 1]) throw PreconditionError("GMeasure::table: g must be nondecreasing");
    }
    if (std::abs(x.front()) > kConstructionTol || std::abs(x.back() - 1.0) > kConstructionTol) {
      throw PreconditionError("GMeasure::table: knots must span exactly [0,1]");
    }
    if (std::abs(y.front()) > kConstructionTol || std::abs(y.back() - 1.0) > kConstructionTol) {
      throw PreconditionError("GMeasure::table: g(0) = 0 and g(1) = 1 are required");
    }
    return GMeasure(Table{std::move(x), std::move(y)});
  }

  double operator()(double x) const {
    x = std::clamp(x, 0.0, 1.0);
    if (const auto* p = std::get_if<Power>(&impl_)) {
      return p->exponent == 2.0 ? x * x : std::pow(x, p->exponent);
    }
    const auto& t = std::get<Table>(impl_);
    const auto it = std::upper_bound(t.x.begin(), t.x.end(), x);
    if (it == t.x.end()) return t.y.back();
    const auto hi = static_cast<std::size_t>(it - t.x.begin());
    const std::size_t lo = hi - 1;
    const double s = (x - t.x[lo]) / (t.x[hi] - t.x[lo]);
    return t.y[lo] + s * (t.y[hi] - t.y[lo]);
  }

  bool is_born() const {
    const auto* p = std::get_if<Power>(&impl_);
    return p != nullptr && p->exponent == 2.0;
  }

  // "power:<p>" or "table:<knot count>"
  std::string describe() const {
    if (const auto* p = std::get_if<Power>(&impl_)) {
      std::string s = std::to_string(p->exponent);
      s.erase(s.find_last_not_of('0') + 1);
      if (!s.empty() && s.back() == '.') s.pop_back();
      return "power:" + s;
    }
    return "table:" + std::to_string(std::get<Table>(impl_).x.size());
  }

  const std::variant<Power, Table>& kind() const noexcept { return impl_; }

 private:
  explicit GMeasure(std::variant<Power, Table> impl) : impl_(std::move(impl)) {}

  std::variant<Power, Table> impl_;
};

struct OutcomeWeights {
  std::vector<double> weights;
  double normalization = 1.0;
};

inline OutcomeWeights outcome_probs(const PureState& state, const Observable& obs,
                                    const GMeasure& g) {
  if (state.dim() != obs.dim()) {
    throw DimensionError("outcome_probs: state and observable dimensions differ");
  }
  OutcomeWeights out;
  out.weights.resize(obs.dim());
  double total = 0.0;
  for (std::size_t j = 0; j < obs.dim(); ++j) {
    const double overlap = std::abs(obs.column(j).dot(state.amplitudes()));
    out.weights[j] = g(overlap);
    total += out.weights[j];
  }
  if (!(total > 0.0)) {
    throw ConsistencyError("outcome_probs: every g-weight vanished, no normalization possible");
  }
  for (auto& w : out.weights) w /= total;
  out.normalization = total;
  return out;
}

// psi_1, psi_2, ... given by a finite prefix followed by one state repeated
// forever. Copy indices are 0-based.
class VectorSequence {
 public:
  explicit VectorSequence(PureState tail, std::vector<PureState> prefix = {})
      : prefix_(std::move(prefix)), tail_(std::move(tail)) {
    for (const auto& s : prefix_) {
      if (s.dim() != tail_.dim()) {
        throw DimensionError("VectorSequence: all states must share one dimension");
      }
    }
  }

  static VectorSequence repetition(PureState psi) { return VectorSequence(std::move(psi)); }

  const PureState& at(std::size_t r) const { return r < prefix_.size() ? prefix_[r] : tail_; }
  const PureState& tail() const noexcept { return tail_; }
  const std::vector<PureState>& prefix() const noexcept { return prefix_; }
  std::size_t prefix_length() const noexcept { return prefix_.size(); }
  std::size_t dim() const noexcept { return tail_.dim(); }

  VectorSequence with_prefix(std::vector<PureState> prefix) const {
    return VectorSequence(tail_, std::move(prefix));
  }

 private:
  std::vector<PureState> prefix_;
  PureState tail_;
};

struct OutcomePrefix {
  std::vector<std::size_t> outcomes;
  std::size_t dim = 0;

  std::size_t length() const noexcept { return outcomes.size(); }
};

struct FrequencyReport {
  double analytic_f = 0.0;
  double empirical_mean = 0.0;
  double empirical_sd = 0.0;
  std::size_t trajectories = 0;
  std::size_t prefix_length = 0;
  double outlier_fraction = 0.0;
  // Per-trajectory empirical frequencies, indexed by trajectory.
  std::vector<double> frequencies;
};

struct ContextualityRecord {
  double qA = 0.0;
  double qB = 0.0;
  double delta = 0.0;
};

// Tail weight of the selected outcome: the Cesaro limit of q_r, unaffected by
// any finite prefix.
inline double component_frequency(const VectorSequence& seq, const Observable& obs,
                                  const GMeasure& g, std::size_t selected) {
  if (selected >= obs.dim()) throw IndexError("component_frequency: selected outcome out of range");
  return outcome_probs(seq.tail(), obs, g).weights[selected];
}

namespace detail {

// Inverse-CDF draws from the per-copy weights of a sequence. Prefix copies
// and the tail are tabulated once.
class CopySampler {
 public:
  CopySampler(const VectorSequence& seq, const Observable& obs, const GMeasure& g) {
    if (seq.dim() != obs.dim()) {
      throw DimensionError("sampler: sequence and observable dimensions differ");
    }
    prefix_.reserve(seq.prefix_length());
    for (const auto& s : seq.prefix()) prefix_.push_back(make_table(s, obs, g));
    tail_ = make_table(seq.tail(), obs, g);
  }

  std::size_t draw(std::size_t r, RandomSource& rng) const {
    const Table& t = r < prefix_.size() ? prefix_[r] : tail_;
    const double u = rng.uniform();
    for (std::size_t j = 0; j < t.cumulative.size(); ++j) {
      if (u < t.cumulative[j]) return j;
    }
    return t.last_positive;
  }

 private:
  struct Table {
    std::vector<double> cumulative;
    std::size_t last_positive = 0;
  };

  static Table make_table(const PureState& s, const Observable& obs, const GMeasure& g) {
    const auto w = outcome_probs(s, obs, g).weights;
    Table t;
    t.cumulative.resize(w.size());
    double acc = 0.0;
    for (std::size_t j = 0; j < w.size(); ++j) {
      acc += w[j];
      t.cumulative[j] = acc;
      if (w[j] > 0.0) t.last_positive = j;
    }
    return t;
  }

  std::vector<Table> prefix_;
  Table tail_;
};

inline std::size_t count_selected(const CopySampler& sampler, std::size_t L,
                                  std::size_t selected, RandomSource& rng) {
  std::size_t hits = 0;
  for (std::size_t r = 0; r < L; ++r) hits += sampler.draw(r, rng) == selected ? 1 : 0;
  return hits;
}

}  // namespace detail

// Outcomes j_1..j_L drawn independently, copy r from the weights of psi_r.
inline OutcomePrefix sample_prefix(const VectorSequence& seq, const Observable& obs,
                                   const GMeasure& g, std::size_t L, RandomSource& rng) {
  if (L < 1) throw PreconditionError("sample_prefix: length must be at least 1");
  const detail::CopySampler sampler(seq, obs, g);
  OutcomePrefix out{std::vector<std::size_t>(L), obs.dim()};
  for (std::size_t r = 0; r < L; ++r) out.outcomes[r] = sampler.draw(r, rng);
  return out;
}

inline double empirical_frequency(const OutcomePrefix& prefix, std::size_t selected) {
  if (prefix.outcomes.empty()) throw PreconditionError("empirical_frequency: empty prefix");
  const auto hits = std::count(prefix.outcomes.begin(), prefix.outcomes.end(), selected);
  return static_cast<double>(hits) / static_cast<double>(prefix.outcomes.size());
}

// M independent length-L prefixes; trajectory t draws from stream
// (rng.master_seed(), t). The report does not depend on `threads`.
inline FrequencyReport strong_law_experiment(const VectorSequence& seq, const Observable& obs,
                                             const GMeasure& g, std::size_t selected,
                                             std::size_t M, std::size_t L,
                                             const RandomSource& rng, unsigned threads = 1) {
  if (M < 1 || L < 1) throw PreconditionError("strong_law_experiment: M and L must be >= 1");
  if (selected >= obs.dim()) {
    throw IndexError("strong_law_experiment: selected outcome out of range");
  }
  const detail::CopySampler sampler(seq, obs, g);
  FrequencyReport rep;
  rep.analytic_f = component_frequency(seq, obs, g, selected);
  rep.trajectories = M;
  rep.prefix_length = L;
  rep.frequencies.assign(M, 0.0);

  const std::uint64_t seed = rng.master_seed();
  auto run = [&](std::size_t first, std::size_t step) {
    for (std::size_t t = first; t < M; t += step) {
      RandomSource stream(seed, t);
      const auto hits = detail::count_selected(sampler, L, selected, stream);
      rep.frequencies[t] = static_cast<double>(hits) / static_cast<double>(L);
    }
  };
  const std::size_t workers = std::clamp<std::size_t>(threads, 1, M);
  if (workers == 1) {
    run(0, 1);
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run, w, workers);
  }

  double sum = 0.0;
  for (double f : rep.frequencies) sum += f;
  rep.empirical_mean = sum / static_cast<double>(M);
  double ss = 0.0;
  for (double f : rep.frequencies) ss += (f - rep.empirical_mean) * (f - rep.empirical_mean);
  rep.empirical_sd = M > 1 ? std::sqrt(ss / static_cast<double>(M - 1)) : 0.0;

  const double v = rep.analytic_f * (1.0 - rep.analytic_f);
  const double threshold = 3.0 * std::sqrt(v / static_cast<double>(L));
  std::size_t outliers = 0;
  for (double f : rep.frequencies) outliers += std::abs(f - rep.analytic_f) > threshold ? 1 : 0;
  rep.outlier_fraction = static_cast<double>(outliers) / static_cast<double>(M);
  return rep;
}

// Weight of a shared eigenvector in two contexts. Requires
// |<A,jA|B,jB>| = 1 within 1e-10.
inline ContextualityRecord contextuality_probe(const PureState& state, const Observable& obsA,
                                               const Observable& obsB, std::size_t jA,
                                               std::size_t jB, const GMeasure& g) {
  if (obsA.dim() != obsB.dim()) throw DimensionError("contextuality_probe: context dimensions differ");
  const double shared = std::abs(obsA.column(jA).dot(obsB.column(jB)));
  if (std::abs(shared - 1.0) > kDerivedTol) {
    throw PreconditionError("contextuality_probe: contexts do not share the selected eigenvector "
                            "(|<A,jA|B,jB>| = " + std::to_string(shared) + ")");
  }
  ContextualityRecord out;
  out.qA = outcome_probs(state, obsA, g).weights[jA];
  out.qB = outcome_probs(state, obsB, g).weights[jB];
  out.delta = std::abs(out.qA - out.qB);
  return out;
}

struct ContextPair {
  Observable a;
  Observable b;
  std::size_t shared_a = 0;
  std::size_t shared_b = 0;
};

// Deterministic pair of contexts sharing |0>: A is the computational basis,
// B rotates A's complement so that `state` overlaps only the first rotated
// complement vector. For the uniform qutrit state this turns the magnitudes
// (1,1,1)/sqrt(3) in A into (1/sqrt(3), sqrt(2/3), 0) in B.
inline ContextPair contextuality_witness(const PureState& state) {
  Observable a = Observable::computational(state.dim());
  Observable b = complement_rotation(a, 0, complement_alignment(a, 0, state));
  return ContextPair{std::move(a), std::move(b), 0, 0};
}

}  // namespace freqlab
