#pragma once

#include <complex>
#include <cstdint>
#include <random>

namespace freqlab {

// Reproducible random stream keyed by (master_seed, stream_index).
//
// Two sources built from the same pair produce the same draws. Parallel
// consumers each take their own stream index; fork() derives child streams
// for nested work (one per trial, one per basis, ...).
class RandomSource {
 public:
  explicit RandomSource(std::uint64_t master_seed, std::uint64_t stream_index = 0)
      : master_seed_(master_seed), stream_index_(stream_index), engine_(make_engine()) {}

  std::uint64_t master_seed() const noexcept { return master_seed_; }
  std::uint64_t stream_index() const noexcept { return stream_index_; }

  // Child stream; independent of the parent's consumption state.
  RandomSource fork(std::uint64_t child) const {
    return RandomSource(master_seed_, mix(stream_index_ ^ mix(child + 0x632be59bd9b4e019ULL)));
  }

  double uniform() { return uniform_(engine_); }
  double normal() { return normal_(engine_); }
  std::complex<double> complex_normal() {
    const double re = normal_(engine_);
    const double im = normal_(engine_);
    return {re, im};
  }

  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  // splitmix64 finalizer
  static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::mt19937_64 make_engine() const {
    std::seed_seq seq{static_cast<std::uint32_t>(master_seed_),
                      static_cast<std::uint32_t>(master_seed_ >> 32),
                      static_cast<std::uint32_t>(stream_index_),
                      static_cast<std::uint32_t>(stream_index_ >> 32)};
    return std::mt19937_64(seq);
  }

  std::uint64_t master_seed_;
  std::uint64_t stream_index_;
  std::mt19937_64 engine_;
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace freqlab
