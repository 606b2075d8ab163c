#include "crur/rng.h"

#include <cmath>

#include "crur/error.h"

namespace crur {

namespace {

inline uint64_t splitmix(uint64_t& s) {
  uint64_t z = (s += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

uint64_t Rng::next_u64() { return splitmix(state_); }

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::gaussian() {
  // Box-Muller; u clamped away from 0 so log stays finite.
  double u = uniform();
  if (u < 1e-300) u = 1e-300;
  double v = uniform();
  return std::sqrt(-2.0 * std::log(u)) * std::cos(2.0 * M_PI * v);
}

int Rng::uniform_int(int n) {
  if (n <= 0) throw ParameterError("uniform_int: n must be positive");
  // Modulo bias is below 2^-32 for the small n used here.
  return static_cast<int>(next_u64() % static_cast<uint64_t>(n));
}

Rng Rng::fork(uint64_t tag, uint64_t ordinal) const {
  uint64_t s = base_;
  s = splitmix(s);
  s ^= tag * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL;
  s = splitmix(s);
  s ^= ordinal * 0x9e3779b97f4a7c15ULL + 1;
  s = splitmix(s);
  return Rng(s);
}

}  // namespace crur
