#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include <Eigen/SVD>

#include "freqlab/gleason.hpp"

using namespace freqlab;
using Catch::Matchers::WithinAbs;

namespace {

double frobenius(const Matrix& a, const Matrix& b) { return (a - b).norm(); }

// Trace-constrained least squares by eliminating the last diagonal entry
// (rho_{D-1,D-1} = 1 - sum of the others) and solving the reduced problem
// with an SVD. Returns the RMS residual.
double eliminated_residual(const std::vector<FrameSample>& samples, std::size_t D) {
  const auto d = static_cast<Eigen::Index>(D);
  const Eigen::Index params = d * d - 1;
  Eigen::MatrixXd a(static_cast<Eigen::Index>(samples.size()), params);
  Eigen::VectorXd b(static_cast<Eigen::Index>(samples.size()));
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const Vector& v = samples[k].vector;
    const auto row = static_cast<Eigen::Index>(k);
    const double last = std::norm(v(d - 1));
    Eigen::Index c = 0;
    // Diagonal entries 0..D-2 relative to the eliminated one.
    for (Eigen::Index i = 0; i + 1 < d; ++i) a(row, c++) = std::norm(v(i)) - last;
    // Off-diagonal rho_ij = x + iy contributes 2 Re(conj(v_i) v_j (x + iy)).
    for (Eigen::Index i = 0; i < d; ++i) {
      for (Eigen::Index j = i + 1; j < d; ++j) {
        const Complex z = std::conj(v(i)) * v(j);
        a(row, c++) = 2.0 * z.real();
        a(row, c++) = -2.0 * z.imag();
      }
    }
    b(row) = samples[k].weight - last;
  }
  const Eigen::VectorXd x = a.jacobiSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(b);
  return std::sqrt((a * x - b).squaredNorm() / static_cast<double>(samples.size()));
}

std::vector<double> diag_probs{0.5, 1.0 / 3.0, 1.0 / 6.0};

}  // namespace

TEST_CASE("density operators", "[gleason]") {
  const auto mixed = DensityOperator::maximally_mixed(3);
  CHECK_THAT(mixed.matrix().trace().real(), WithinAbs(1.0, 1e-15));
  CHECK_THAT(mixed.expectation(PureState::basis(3, 2).amplitudes()), WithinAbs(1.0 / 3.0, 1e-15));

  RandomSource rng(1);
  for (int k = 0; k < 20; ++k) {
    const auto rho = DensityOperator::random(3 + static_cast<std::size_t>(k % 2), rng);
    CHECK(DensityOperator::min_eigenvalue(rho.matrix()) >= -1e-10);
  }

  Matrix bad = Matrix::Identity(2, 2);
  CHECK_THROWS_AS(DensityOperator(bad), PreconditionError);
  bad(0, 0) = 1.5;
  bad(1, 1) = -0.5;
  CHECK_THROWS_AS(DensityOperator(bad), PreconditionError);
  bad = Matrix::Identity(2, 2) / 2.0;
  bad(0, 1) = 0.1;
  CHECK_THROWS_AS(DensityOperator(bad), PreconditionError);
}

TEST_CASE("frame sum audit", "[gleason]") {
  const RandomSource rng(2);
  const auto mixed = FrameCandidate::born(DensityOperator::maximally_mixed(3));
  RandomSource probe(3);
  const auto basis = random_basis(3, probe);
  for (double w : mixed.weights(basis)) CHECK_THAT(w, WithinAbs(1.0 / 3.0, 1e-12));
  CHECK(frame_sum_audit(mixed, 3, 100, rng).max_sum_deviation < 1e-12);

  const auto quartic = FrameCandidate::gmeasure(GMeasure::power(4.0), random_state(3, probe));
  CHECK(frame_sum_audit(quartic, 3, 100, rng).max_sum_deviation < 1e-10);

  const auto random_rho = FrameCandidate::born(DensityOperator::random(3, probe));
  const auto audit = frame_sum_audit(random_rho, 3, 500, rng);
  CHECK(audit.max_sum_deviation < 1e-10);
  CHECK(audit.bases_tested == 500);

  CHECK_THROWS_AS(frame_sum_audit(mixed, 4, 1, rng), DimensionError);
}

TEST_CASE("Born candidates pass both audits", "[gleason][property]") {
  RandomSource rng(4);
  for (std::size_t D : {3u, 4u}) {
    for (int k = 0; k < 5; ++k) {
      const auto c = FrameCandidate::born(k == 0 ? DensityOperator::maximally_mixed(D)
                                                 : DensityOperator::random(D, rng));
      CHECK(frame_sum_audit(c, D, 200, rng.fork(static_cast<std::uint64_t>(k))).max_sum_deviation < 1e-10);
      const auto audit = noncontextuality_audit(c, D, 500, rng.fork(static_cast<std::uint64_t>(100 + k)));
      CHECK(audit.max_context_deviation < 1e-10);
      CHECK(audit.bases_tested == 501);
    }
  }
}

TEST_CASE("noncontextuality audit", "[gleason]") {
  const RandomSource rng(5);
  const auto u = PureState::uniform(3);

  SECTION("x^4 witness") {
    const auto audit = noncontextuality_audit(FrameCandidate::gmeasure(GMeasure::power(4.0), u), 3, 0, rng);
    CHECK(audit.bases_tested == 1);
    CHECK(audit.max_context_deviation >= 2.0 / 15.0 - 1e-10);
  }

  SECTION("x^2 is noncontextual for any state") {
    RandomSource s(6);
    for (int k = 0; k < 5; ++k) {
      const auto c = FrameCandidate::gmeasure(GMeasure::born(), random_state(3, s));
      CHECK(noncontextuality_audit(c, 3, 200, rng).max_context_deviation < 1e-10);
    }
  }

  SECTION("qubits are rejected") {
    CHECK_THROWS_AS(noncontextuality_audit(FrameCandidate::born(DensityOperator::maximally_mixed(2)), 2, 10, rng),
                    DimensionError);
  }

  SECTION("random pairs are deterministic per seed") {
    const auto c = FrameCandidate::gmeasure(GMeasure::power(3.0), u);
    CHECK(noncontextuality_audit(c, 3, 50, rng, false).max_context_deviation ==
          noncontextuality_audit(c, 3, 50, rng, false).max_context_deviation);
  }
}

TEST_CASE("power rules other than x^2 are detected by random pairs alone", "[gleason][property]") {
  RandomSource states(7);
  for (double p : {1.0, 3.0, 4.0}) {
    int detected = 0;
    const int seeds = 100;
    for (int seed = 0; seed < seeds; ++seed) {
      const auto c = FrameCandidate::gmeasure(GMeasure::power(p), random_state(3, states));
      const auto audit = noncontextuality_audit(c, 3, 500, RandomSource(static_cast<std::uint64_t>(seed)), false);
      detected += audit.max_context_deviation > 1e-3 ? 1 : 0;
    }
    CHECK(detected >= 99);
  }
}

TEST_CASE("density recovery", "[gleason]") {
  const RandomSource rng(8);

  SECTION("diagonal source from 200 bases") {
    const auto rho = DensityOperator::diagonal(diag_probs);
    const auto samples = frame_samples(FrameCandidate::born(rho), 200, rng);
    CHECK(samples.size() == 600);
    const auto fit = fit_density(samples, 3);
    CHECK(frobenius(fit.estimate, rho.matrix()) < 1e-8);
    CHECK(fit.residual < 1e-8);
    REQUIRE(fit.rho.has_value());
    CHECK_THAT(fit.rho->matrix().trace().real(), WithinAbs(1.0, 1e-12));
    CHECK(fit.min_eigenvalue >= -1e-10);
  }

  SECTION("maximally mixed source") {
    const auto fit = fit_density(frame_samples(FrameCandidate::born(DensityOperator::maximally_mixed(3)), 50, rng), 3);
    CHECK(frobenius(fit.estimate, Matrix::Identity(3, 3) / 3.0) < 1e-10);
  }

  SECTION("x^4 assignments have no density operator") {
    const auto born = fit_density(frame_samples(FrameCandidate::born(DensityOperator::diagonal(diag_probs)), 200, rng), 3);
    const auto quartic_samples =
        frame_samples(FrameCandidate::gmeasure(GMeasure::power(4.0), PureState::uniform(3)), 200, rng);
    const auto quartic = fit_density(quartic_samples, 3);
    CHECK(quartic.residual > 1e-3);
    CHECK(quartic.residual >= 1e3 * std::max(born.residual, 1e-16));
    CHECK_THAT(quartic.residual, WithinAbs(eliminated_residual(quartic_samples, 3), 1e-10));
  }

  SECTION("too few samples") {
    const auto samples = frame_samples(FrameCandidate::born(DensityOperator::maximally_mixed(3)), 2, rng);
    try {
      fit_density(samples, 3);
      FAIL("expected an underdetermined fit");
    } catch (const UnderdeterminedError& e) {
      CHECK(e.rank() < 9);
      CHECK(e.required() == 9);
    }
  }

  SECTION("input validation") {
    std::vector<FrameSample> bad{FrameSample{Vector::Ones(3), 0.5}};
    CHECK_THROWS_AS(fit_density(bad, 3), PreconditionError);
    bad = {FrameSample{PureState::basis(3, 0).amplitudes(), 1.5}};
    CHECK_THROWS_AS(fit_density(bad, 3), PreconditionError);
    bad = {FrameSample{PureState::basis(2, 0).amplitudes(), 0.5}};
    CHECK_THROWS_AS(fit_density(bad, 3), DimensionError);
  }
}

TEST_CASE("Born data is recovered exactly for random sources", "[gleason][property]") {
  RandomSource rng(9);
  for (std::size_t D : {3u, 4u}) {
    for (int k = 0; k < 10; ++k) {
      const auto rho = DensityOperator::random(D, rng);
      const auto samples = frame_samples(FrameCandidate::born(rho), 20 * D, rng.fork(static_cast<std::uint64_t>(k)));
      const auto fit = fit_density(samples, D);
      CHECK(frobenius(fit.estimate, rho.matrix()) < 1e-8);
      CHECK(fit.residual < 1e-10);
      CHECK_THAT(eliminated_residual(samples, D), WithinAbs(fit.residual, 1e-10));
      REQUIRE(fit.rho.has_value());
      CHECK(fit.min_eigenvalue >= -1e-10);
    }
  }
}
