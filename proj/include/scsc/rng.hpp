#pragma once

#include <cstdint>
#include <random>

namespace scsc {

// Named sub-streams. Each consumer of randomness derives its own generator
// from (seed, stream, index) so results never depend on call order or on how
// work is scheduled across threads.
enum class Stream : std::uint64_t {
  subsample_mask = 1,
  dictionary_init = 2,
  draw = 3,
  observation = 4,
  synthetic = 5,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  static Rng derive(std::uint64_t seed, Stream stream, std::uint64_t index) {
    std::uint64_t h = splitmix64(seed);
    h = splitmix64(h ^ static_cast<std::uint64_t>(stream));
    h = splitmix64(h ^ index);
    return Rng(h);
  }

  static constexpr result_type min() { return std::mt19937_64::min(); }
  static constexpr result_type max() { return std::mt19937_64::max(); }
  result_type operator()() { return engine_(); }

  // Uniform integer in [0, bound). Unbiased (rejection on the top bits).
  std::uint64_t below(std::uint64_t bound) {
    const std::uint64_t limit = max() - max() % bound;
    std::uint64_t r;
    do {
      r = engine_();
    } while (r >= limit);
    return r % bound;
  }

  // Uniform double in [0, 1).
  double uniform() { return double(engine_() >> 11) * 0x1.0p-53; }

  double normal() { return normal_(engine_); }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

}  // namespace scsc
