#pragma once

#include <scsc/core.hpp>

#include <cstdint>

namespace scsc {

// Piecewise-smooth grayscale scene in [0, 1]: shaded background, random
// ellipses and bars with soft edges, a few oriented gratings and light noise.
// Deterministic in (seed, index).
Signal synthetic_scene(Geometry geometry, std::uint64_t seed, std::uint64_t index);

struct SyntheticCodes {
  CodeMap codes;
  Signal signal;  // D z
};

// Sparse codes with `density` expected fraction of nonzeros, amplitudes
// uniform in +-[0.5, 1.5], and the signal they generate with `dict`.
SyntheticCodes synthesize_from_dictionary(const Dictionary& dict, Geometry geometry,
                                          double density, std::uint64_t seed);

}  // namespace scsc
