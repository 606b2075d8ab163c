#ifndef CRUR_TOKENS_H_
#define CRUR_TOKENS_H_

namespace crur {

// Reserved vocabulary slots, fixed across corpora and checkpoints.
inline constexpr int kPad = 0;
inline constexpr int kStart = 1;
inline constexpr int kEnd = 2;
inline constexpr int kUnk = 3;
inline constexpr int kReservedTokens = 4;

}  // namespace crur

#endif  // CRUR_TOKENS_H_
