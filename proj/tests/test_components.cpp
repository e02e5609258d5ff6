#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "freqlab/components.hpp"

using namespace freqlab;
using Catch::Matchers::WithinAbs;

namespace {

PureState with_phase(const PureState& s, double theta) {
  return PureState(Vector(s.amplitudes() * std::polar(1.0, theta)));
}

// State at angle with |<e0|.>| = sqrt(1/3).
PureState third_state() { return PureState::from_born_weight(1.0 / 3.0); }

// Pool with a handful of tail rays, random phases and random prefixes so the
// equivalence classes are nontrivial.
std::vector<VectorSequence> sequence_pool(RandomSource& rng, std::size_t D, std::size_t size) {
  std::vector<PureState> rays;
  for (int k = 0; k < 5; ++k) rays.push_back(random_state(D, rng));
  std::vector<VectorSequence> pool;
  for (std::size_t k = 0; k < size; ++k) {
    const auto& ray = rays[static_cast<std::size_t>(rng.uniform() * 5.0) % 5];
    std::vector<PureState> prefix;
    const auto len = static_cast<std::size_t>(rng.uniform() * 4.0);
    for (std::size_t r = 0; r < len; ++r) {
      prefix.push_back(rng.uniform() < 0.3 ? PureState::basis(D, r % D) : random_state(D, rng));
    }
    pool.emplace_back(with_phase(ray, 6.283 * rng.uniform()), prefix);
  }
  return pool;
}

// Sum of |<psi;{i}|{phi}>|^2 over all D^K decorations supported below K.
double brute_force_sum(const VectorSequence& base, const VectorSequence& phi, std::size_t K) {
  const std::size_t D = base.dim();
  std::size_t count = 1;
  for (std::size_t r = 0; r < K; ++r) count *= D;
  double total = 0.0;
  for (std::size_t idx = 0; idx < count; ++idx) {
    std::map<std::size_t, std::size_t> entries;
    std::size_t x = idx;
    for (std::size_t r = 0; r < K; ++r) {
      if (x % D != 0) entries[r] = x % D;
      x /= D;
    }
    const DecoratedSequence d(base, IndexSequence(entries));
    total += std::norm(decorated_inner(d, phi).value);
  }
  return total;
}

}  // namespace

TEST_CASE("index sequences", "[components]") {
  const IndexSequence empty;
  CHECK(empty.support_end() == 0);
  CHECK(empty.at(7) == 0);
  const IndexSequence s({{2, 1}, {5, 2}});
  CHECK(s.at(2) == 1);
  CHECK(s.at(3) == 0);
  CHECK(s.support_end() == 6);
  CHECK(s.max_label() == 2);
  CHECK_THROWS_AS(IndexSequence(std::map<std::size_t, std::size_t>{{1, 0}}), PreconditionError);
  CHECK_THROWS_AS(DecoratedSequence(VectorSequence::repetition(PureState::uniform(2)), s), IndexError);
}

TEST_CASE("completion bases are orthonormal and start with the state", "[components][property]") {
  RandomSource rng(8);
  for (int k = 0; k < 100; ++k) {
    const std::size_t D = 2 + static_cast<std::size_t>(k % 5);
    const auto psi = k % 10 == 0 ? PureState::basis(D, D - 1) : random_state(D, rng);
    const Matrix c = completion_basis(psi);
    CHECK((c.adjoint() * c - Matrix::Identity(c.rows(), c.cols())).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((c.col(0) - psi.amplitudes()).norm() <= 1e-12);
  }
}

TEST_CASE("sequence overlap", "[components]") {
  RandomSource rng(9);
  const auto psi = random_state(3, rng);
  const auto a = VectorSequence(psi, {random_state(3, rng), random_state(3, rng)});

  const auto self = sequence_overlap(a, a);
  CHECK_THAT(self.prefix_log, WithinAbs(0.0, 1e-12));
  CHECK(self.tail_rate == 0.0);
  CHECK(self.converges);
  CHECK_THAT(self.value(), WithinAbs(1.0, 1e-12));

  const auto orth = sequence_overlap(VectorSequence::repetition(PureState::basis(2, 0)),
                                     VectorSequence::repetition(PureState::basis(2, 1)));
  CHECK_FALSE(orth.converges);
  CHECK(orth.value() == 0.0);

  // One prefix factor of magnitude 1/2.
  const auto tail = PureState::basis(2, 0);
  const auto half = PureState::from_born_weight(0.25);
  const auto h = sequence_overlap(VectorSequence(tail, {tail, tail}), VectorSequence(tail, {tail, half}));
  CHECK(h.converges);
  CHECK_THAT(h.value(), WithinAbs(0.5, 1e-12));

  // Parallel tails with a zero prefix factor.
  const auto z = sequence_overlap(VectorSequence(tail, {PureState::basis(2, 1)}), VectorSequence::repetition(tail));
  CHECK_FALSE(z.converges);
  CHECK(std::isinf(z.prefix_log));
  CHECK(z.value() == 0.0);

  CHECK_THROWS_AS(sequence_overlap(a, VectorSequence::repetition(PureState::uniform(2))), DimensionError);
}

TEST_CASE("equivalence", "[components]") {
  RandomSource rng(10);
  const auto psi = random_state(3, rng);
  const auto seq = VectorSequence(psi, {random_state(3, rng)});
  CHECK(equivalent(seq, seq));
  CHECK(equivalent(VectorSequence::repetition(psi), VectorSequence::repetition(with_phase(psi, 1.3))));

  // An orthogonal prefix slot does not separate sequences with the same tail.
  const auto e0 = PureState::basis(2, 0);
  CHECK(equivalent(VectorSequence(e0, {PureState::basis(2, 1)}), VectorSequence::repetition(e0)));

  CHECK_FALSE(equivalent(VectorSequence::repetition(e0), VectorSequence::repetition(third_state())));
  CHECK_FALSE(equivalent(seq, VectorSequence::repetition(PureState::uniform(2))));
}

TEST_CASE("equivalence is an equivalence relation on a generated pool", "[components][property]") {
  RandomSource rng(11);
  const auto pool = sequence_pool(rng, 3, 50);
  const std::size_t n = pool.size();
  std::vector<std::vector<char>> eq(n, std::vector<char>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) eq[i][j] = equivalent(pool[i], pool[j]) ? 1 : 0;
  }
  std::size_t classes_seen = 0, failures = 0;
  for (std::size_t i = 0; i < n; ++i) {
    failures += eq[i][i] ? 0 : 1;
    for (std::size_t j = 0; j < n; ++j) {
      failures += eq[i][j] == eq[j][i] ? 0 : 1;
      for (std::size_t k = 0; k < n; ++k) {
        if (eq[i][j] && eq[j][k] && !eq[i][k]) ++failures;
      }
    }
    bool first = true;
    for (std::size_t j = 0; j < i; ++j) first = first && !eq[i][j];
    classes_seen += first ? 1 : 0;
  }
  CHECK(failures == 0);
  CHECK(classes_seen > 1);
  CHECK(classes_seen < n);
}

TEST_CASE("inequivalent sequences have exactly zero overlap", "[components][property]") {
  RandomSource rng(12);
  for (std::size_t D : {2u, 3u, 4u}) {
    const auto pool = sequence_pool(rng, D, 40);
    for (const auto& a : pool) {
      for (const auto& b : pool) {
        if (!equivalent(a, b)) CHECK(sequence_overlap(a, b).value() == 0.0);
      }
    }
  }
}

TEST_CASE("decorated inner products", "[components]") {
  RandomSource rng(13);
  const auto base = VectorSequence(random_state(3, rng), {random_state(3, rng), random_state(3, rng)});

  const DecoratedSequence plain(base, IndexSequence{});
  const auto one = decorated_inner(plain, base);
  CHECK(one.equivalent);
  CHECK_THAT(one.magnitude, WithinAbs(1.0, 1e-12));

  const DecoratedSequence flipped(base, IndexSequence(std::map<std::size_t, std::size_t>{{1, 1}}));
  CHECK_THAT(decorated_inner(flipped, base).magnitude, WithinAbs(0.0, 1e-12));

  const auto psi = PureState::basis(2, 0);
  const auto phi = VectorSequence(psi, {third_state()});
  CHECK_THAT(decorated_inner(DecoratedSequence(VectorSequence::repetition(psi), {}), phi).magnitude,
             WithinAbs(std::sqrt(1.0 / 3.0), 1e-12));

  const auto other = decorated_inner(plain, VectorSequence::repetition(random_state(3, rng)));
  CHECK_FALSE(other.equivalent);
  CHECK(other.value == Complex(0.0, 0.0));

  // Rephased tail: factors past the prefix contribute 1 regardless of phase.
  const auto rephased = VectorSequence(with_phase(base.tail(), 0.7), base.prefix());
  CHECK_THAT(decorated_inner(plain, rephased).magnitude, WithinAbs(1.0, 1e-12));
}

TEST_CASE("decorated overlaps obey Bessel's inequality", "[components][property]") {
  RandomSource rng(14);
  for (int k = 0; k < 20; ++k) {
    const std::size_t D = 2 + static_cast<std::size_t>(k % 2);
    const auto tail = random_state(D, rng);
    std::vector<PureState> bp, pp;
    for (int r = 0; r < 3; ++r) {
      bp.push_back(random_state(D, rng));
      pp.push_back(random_state(D, rng));
    }
    const VectorSequence base(tail, bp);
    const VectorSequence phi(with_phase(tail, 2.0), pp);
    for (std::size_t K = 0; K <= 5; ++K) {
      const double total = brute_force_sum(base, phi, K);
      CHECK(total <= 1.0 + 1e-10);
      CHECK_THAT(completeness_check(base, phi, K).partial_sum, WithinAbs(total, 1e-12));
    }
  }
}

TEST_CASE("completeness", "[components]") {
  RandomSource rng(15);
  const auto base = VectorSequence(random_state(3, rng), {random_state(3, rng)});
  for (std::size_t N : {0u, 1u, 4u, 50u}) {
    CHECK_THAT(completeness_check(base, base, N).partial_sum, WithinAbs(1.0, 1e-12));
  }

  const auto psi = PureState::basis(2, 0);
  const auto phi = VectorSequence(psi, {third_state()});
  const auto rec = completeness_check(VectorSequence::repetition(psi), phi, 3);
  CHECK_THAT(rec.partial_sum, WithinAbs(1.0, 1e-12));
  CHECK_THAT(completeness_check(VectorSequence::repetition(psi), phi, 0).partial_sum, WithinAbs(1.0 / 3.0, 1e-12));

  CHECK_THROWS_AS(completeness_check(base, VectorSequence::repetition(random_state(3, rng)), 2), PreconditionError);
}

TEST_CASE("completeness partial sums are monotone and approach one", "[components][property]") {
  RandomSource rng(16);
  for (int k = 0; k < 30; ++k) {
    const std::size_t D = 2 + static_cast<std::size_t>(k % 4);
    const auto tail = random_state(D, rng);
    std::vector<PureState> pp;
    for (int r = 0; r < 12; ++r) pp.push_back(random_state(D, rng));
    const VectorSequence base = VectorSequence::repetition(tail);
    const VectorSequence phi(tail, pp);
    double prev = -1.0;
    for (std::size_t N = 0; N <= 14; ++N) {
      const auto rec = completeness_check(base, phi, N);
      CHECK(rec.partial_sum >= prev - 1e-15);
      CHECK(rec.partial_sum >= rec.bound - 1e-12);
      CHECK(rec.partial_sum <= 1.0 + 1e-10);
      prev = rec.partial_sum;
    }
    CHECK_THAT(prev, WithinAbs(1.0, 1e-12));
  }
}

TEST_CASE("tail bound controls the partial sum", "[components][property]") {
  RandomSource rng(17);
  for (double eps : {0.1, 0.01}) {
    int exercised = 0;
    for (int k = 0; k < 200; ++k) {
      const std::size_t D = 2 + static_cast<std::size_t>(k % 3);
      const auto tail = random_state(D, rng);
      // Prefix copies close to the tail so the bound straddles 1 - eps.
      std::vector<PureState> pp;
      for (int r = 0; r < 8; ++r) {
        const double w = 0.2 * eps * rng.uniform();
        pp.push_back(PureState::normalized(Vector(std::sqrt(1.0 - w) * tail.amplitudes() +
                                                 std::sqrt(w) * random_state(D, rng).amplitudes())));
      }
      const VectorSequence base = VectorSequence::repetition(tail);
      const VectorSequence phi(tail, pp);
      for (std::size_t N = 0; N <= 8; ++N) {
        const auto rec = completeness_check(base, phi, N);
        if (std::sqrt(rec.bound) > 1.0 - eps) {
          ++exercised;
          CHECK(rec.partial_sum >= 1.0 - 2.0 * eps);
        }
      }
    }
    CHECK(exercised > 100);
  }
}
