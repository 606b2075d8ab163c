#ifndef CRUR_GENERATE_H_
#define CRUR_GENERATE_H_

#include <vector>

#include "crur/cells.h"
#include "crur/params.h"

namespace crur {

// One partial or completed caption.  tokens always begins with the start
// marker; log_prob accumulates per-token log softmax scores (the product of
// conditionals in log space, no length normalization unless asked for).
struct Hypothesis {
  std::vector<int> tokens;
  double log_prob = 0.0;
  CrurState state;       // core state the last composition was read from
  FeedbackState fb;      // memory-feedback streams (scheme: memory)
  bool finished = false;  // last token is END, or length hit max_len
};

// Log probabilities over the candidate set: the start marker is never a
// candidate, so it is masked out before the softmax and the rest
// renormalizes (exp-sum of the returned entries is 1).
Tensor masked_log_probs(const Tensor& logits);

// Argmax with ties broken toward the lowest index.
int argmax_index(const Tensor& scores);

Hypothesis greedy_hypothesis(const CrurParams& params, const Tensor& v,
                             const Tensor& w, int max_len);
std::vector<int> greedy_decode(const CrurParams& params, const Tensor& v,
                               const Tensor& w, int max_len);

// Synchronous beam over total log-likelihood: every live hypothesis
// proposes its top-B continuations, the global top-B survive, finished
// ones accumulate in a pool returned sorted by score (ties: shorter first,
// then lexicographic tokens).  The argmax lineage is never cut, so the
// best returned score is at least the greedy baseline's.  length_normalize
// divides the ranking score by the emitted-token count.
std::vector<Hypothesis> beam_search(const CrurParams& params, const Tensor& v,
                                    const Tensor& w, int beam_width,
                                    int max_len,
                                    bool length_normalize = false);

// Recurrent-decoder scheme: the core's composed tensor is fed to a gated
// decoder cell each step as [embedding(previous token); f_t]; the decoder
// hidden starts at zero (kConstant) or at h0_w * f_first (kFromF).
std::vector<int> attn_decode(const CrurParams& params,
                             const DecoderParams& dec, const Tensor& v,
                             const Tensor& w, int max_len, AttnInit init_mode);

// Teacher-forced negative log-likelihood of the given body tokens (no
// markers) under the recurrent-decoder scheme; used for training and for
// gradient checks through decoder and core jointly.
Tensor attn_forced_loss(const CrurParams& params, const DecoderParams& dec,
                        const Tensor& v, const Tensor& w,
                        const std::vector<int>& body, AttnInit init_mode);

}  // namespace crur

#endif  // CRUR_GENERATE_H_
