#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace voiceloop {

// Seeded generator with a platform-independent output stream.
//
// std::mt19937_64 is bit-exact across standard libraries, but the standard
// distributions are not, so the conversions to reals live here:
//   uniform()  = (next() >> 11) * 2^-53
//   normal()   = Box-Muller on two uniforms, spare value cached
//   below(n)   = rejection sampling on next()
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  std::size_t below(std::size_t n);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// splitmix64 finalizer over (base, stream); used to give every epoch,
// utterance and worker its own independent stream.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

}  // namespace voiceloop
