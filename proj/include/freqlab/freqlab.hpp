#pragma once

#include "freqlab/errors.hpp"
#include "freqlab/random.hpp"
#include "freqlab/hilbert.hpp"
#include "freqlab/finite_freq.hpp"
#include "freqlab/measures.hpp"
#include "freqlab/components.hpp"
#include "freqlab/gleason.hpp"

namespace freqlab {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace freqlab
