#ifndef CRUR_CELLS_H_
#define CRUR_CELLS_H_

#include <utility>
#include <vector>

#include "crur/params.h"

namespace crur {

// The coupled hidden pair plus branch cell memories (sigmoid-gated cells
// with memory only; undefined otherwise).  t counts composed states: the
// initial state is t=1 and each step advances t by one.
struct CrurState {
  Tensor s;   // [s_rows*s_cols]
  Tensor p;   // [p_dim]
  Tensor c1;  // [s_rows*s_cols]
  Tensor c2;  // [p_dim]
  int t = 0;
};

struct DropoutCtx {
  bool training = false;
  double rate = 0.0;
  Rng* rng = nullptr;
};

struct StepOutput {
  Tensor u;       // [s_cols]
  Tensor f;       // [s_rows]
  Tensor logits;  // [vocab]
};

// S_1 = sigmoid(v * C_S), p_1 = sigmoid(w * C_p); memories zero; t = 1.
CrurState init_state(const Tensor& v, const Tensor& w,
                     const CrurParams& params);

// One coupled update.  Both branches read only the incoming state
// (Jacobi-style).  The feedback embeddings x1/x2 participate only when the
// incoming state has t > 1; on the first step they are ignored entirely
// (may be undefined).
CrurState step(const CrurState& state, const Tensor& x1, const Tensor& x2,
               const CrurParams& params);

// Named variants (step() dispatches on params.cfg).
CrurState step_lstm_open(const CrurState&, const Tensor& x1, const Tensor& x2,
                         const CrurParams&);
CrurState step_lstm_closed(const CrurState&, const Tensor& x1,
                           const Tensor& x2, const CrurParams&);
CrurState step_gru_open(const CrurState&, const Tensor& x1, const Tensor& x2,
                        const CrurParams&);
CrurState step_gru_closed(const CrurState&, const Tensor& x1,
                          const Tensor& x2, const CrurParams&);
CrurState step_rnn_open(const CrurState&, const Tensor& x1, const Tensor& x2,
                        const CrurParams&);
CrurState step_rnn_closed(const CrurState&, const Tensor& x1,
                          const Tensor& x2, const CrurParams&);

// u = sigmoid(head_u * p); f = matricize(S) * u (dropout in training);
// logits = head_vocab * f.
StepOutput compose_output(const CrurState& state, const CrurParams& params,
                          const DropoutCtx& dropout);

// Language-attribute logits from the structural key.
Tensor pos_head(const Tensor& u, const CrurParams& params);

// Hidden state of the two feedback-memory streams (memory scheme only).
struct FeedbackState {
  Tensor h1, c1, h2, c2;  // [embed_dim] each
};
FeedbackState init_feedback_state(const CrurConfig& cfg);

// Maps the previous token's embedding to the branch inputs (x1, x2).
// shared: both equal emb; mlp: two learned projections; memory: two
// recurrent streams advancing fb_state.
std::pair<Tensor, Tensor> feedback_transform(const Tensor& emb,
                                             const CrurParams& params,
                                             FeedbackState* fb_state);

// Plain sigmoid-gated cell shared by the feedback-memory streams, the
// sequence classifier, and the recurrent decoder: 4 gates over (x, h).
struct PlainCellState {
  Tensor h, c;
};
PlainCellState plain_cell_step(const std::vector<GateWeights>& gates,
                               const Tensor& x, const PlainCellState& prev);

// Forward + backward encodings of a token sequence; hiddens returned in
// processing order (bwd[0] saw the last token).
struct BiLstmTrace {
  std::vector<Tensor> fwd, bwd;
};
BiLstmTrace bilstm_run(const std::vector<int>& seq, const BiLstmParams&);

// Classification logits out_fwd*h_fwd_last + out_bwd*h_bwd_last.
Tensor bilstm_classify(const std::vector<int>& seq, const BiLstmParams&);

}  // namespace crur

#endif  // CRUR_CELLS_H_
