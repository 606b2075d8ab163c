#ifndef CRUR_RNG_H_
#define CRUR_RNG_H_

#include <cstdint>

namespace crur {

// Self-contained splitmix64 generator. All randomness in the toolkit flows
// through this class so that runs are bit-reproducible and resumable
// mid-training: substreams are derived from (seed, tag, ordinal) rather
// than from consumed state.
class Rng {
 public:
  explicit Rng(uint64_t seed) : base_(seed), state_(seed) {}

  uint64_t next_u64();

  // Uniform on [0, 1), 53-bit resolution.
  double uniform();
  // Uniform on [lo, hi).
  double uniform(double lo, double hi);
  // Standard normal via Box-Muller; the spare variate is discarded.
  double gaussian();
  // Uniform integer in [0, n). n must be positive.
  int uniform_int(int n);
  bool bernoulli(double p) { return uniform() < p; }

  // Deterministic substream keyed by (seed, tag, ordinal), independent of
  // how much this generator has already been consumed.
  Rng fork(uint64_t tag, uint64_t ordinal = 0) const;

 private:
  uint64_t base_;   // stream identity, never advanced
  uint64_t state_;  // advancing splitmix64 state
};

}  // namespace crur

#endif  // CRUR_RNG_H_
