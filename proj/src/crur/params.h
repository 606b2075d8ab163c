#ifndef CRUR_PARAMS_H_
#define CRUR_PARAMS_H_

#include <functional>
#include <string>
#include <vector>

#include "crur/config.h"
#include "crur/rng.h"
#include "crur/tensor.h"

namespace crur {

// One gate (or candidate) of one recurrent branch.  All equations are
// bias-free; paths not used by the configured variant stay undefined.
//   from_x     previous-token feedback path
//   from_own   own branch state (for the GRU candidate: reset-gated state)
//   from_cross other branch's state, closed coupling only
//   from_carry update-gated own state, closed GRU candidate only
struct GateWeights {
  Tensor from_x;
  Tensor from_own;
  Tensor from_cross;
  Tensor from_carry;
};

// Gate indices per cell kind.
namespace gate {
inline constexpr int kIn = 0, kForget = 1, kOut = 2, kCand = 3;  // lstm
inline constexpr int kUpdate = 0, kReset = 1, kGruCand = 2;      // gru
inline constexpr int kSingle = 0;                                // rnn
}  // namespace gate

struct BranchParams {
  std::vector<GateWeights> gates;
};

// Feedback-memory streams: two independent recurrent transforms in the same
// sigmoid-gated style as the main cells (state reset at sequence start).
struct FeedbackMemoryParams {
  std::vector<GateWeights> gates1;  // 4 lstm-style gates, stream 1
  std::vector<GateWeights> gates2;  // stream 2
};

struct CrurParams {
  CrurConfig cfg;

  Tensor embed;   // [vocab, embed_dim]
  Tensor init_s;  // [v_dim, s_rows*s_cols]
  Tensor init_p;  // [w_dim, p_dim]

  BranchParams branch1;  // produces S (dim s_rows*s_cols)
  BranchParams branch2;  // produces p (dim p_dim)

  Tensor head_u;      // [s_cols, p_dim]      structural key
  Tensor head_vocab;  // [vocab, s_rows]      word logits
  Tensor head_pos;    // [pos_classes, s_cols] language-attribute logits

  Tensor fb_mlp1, fb_mlp2;       // [embed_dim, embed_dim], mlp feedback
  FeedbackMemoryParams fb_mem;   // memory feedback

  // Uniform(-0.08, 0.08) init for every allocated tensor, consuming rng in
  // visitation order; requires_grad set on all of them.
  static CrurParams init(const CrurConfig& cfg, Rng& rng);

  // Visits every allocated parameter tensor with a stable name, in a fixed
  // order (the checkpoint and optimizer orderings).
  void for_each_param(
      const std::function<void(const std::string&, Tensor&)>& fn);
  void for_each_param(
      const std::function<void(const std::string&, const Tensor&)>& fn) const;
};

// Recurrent decoder used by attn decoding: one sigmoid-gated cell over
// [embedding ; f_t], plus output layer and optional state-seeding matrix.
struct DecoderParams {
  CrurConfig cfg;
  std::vector<GateWeights> gates;  // 4 gates; from_x: [e+m, d], from_own: [d, d]
  Tensor out_w;  // [vocab, d]
  Tensor h0_w;   // [d, s_rows], state seeding for attn_init = from_f

  static DecoderParams init(const CrurConfig& cfg, Rng& rng);
  void for_each_param(
      const std::function<void(const std::string&, Tensor&)>& fn);
  void for_each_param(
      const std::function<void(const std::string&, const Tensor&)>& fn) const;
};

// Standalone forward/backward sequence classifier.
struct BiLstmParams {
  int vocab = 0, embed_dim = 0, hidden_dim = 0, n_out = 0;
  Tensor embed;                        // [vocab, embed_dim]
  std::vector<GateWeights> fwd, bwd;   // 4 gates each
  Tensor out_fwd, out_bwd;             // [n_out, hidden_dim]

  static BiLstmParams init(int vocab, int embed_dim, int hidden_dim,
                           int n_out, Rng& rng);
  void for_each_param(
      const std::function<void(const std::string&, Tensor&)>& fn);
};

}  // namespace crur

#endif  // CRUR_PARAMS_H_
