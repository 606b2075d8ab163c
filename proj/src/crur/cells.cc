#include "crur/cells.h"

#include <string>

#include "crur/error.h"

namespace crur {

namespace {

using ops::add;
using ops::mat_vec;
using ops::mul;
using ops::sigmoid;
using ops::sub;
using ops::vec_mat;

// Pre-activation of one gate: own-state term, cross-state term when the
// variant has one, token term when the indicator is on.
Tensor gate_pre(const GateWeights& g, const Tensor& own, const Tensor& cross,
                const Tensor& x, bool use_x) {
  Tensor acc = vec_mat(own, g.from_own);
  if (g.from_cross.defined()) acc = add(acc, vec_mat(cross, g.from_cross));
  if (use_x) acc = add(acc, vec_mat(x, g.from_x));
  return acc;
}

void check_kind(const CrurParams& params, CellKind kind, Coupling coupling,
                const char* fn) {
  if (params.cfg.cell_kind != kind || params.cfg.coupling != coupling)
    throw ParameterError(std::string(fn) + ": parameters were built for " +
                         to_string(params.cfg.coupling) + " " +
                         to_string(params.cfg.cell_kind));
}

bool indicator_on(const CrurState& st, const Tensor& x1, const Tensor& x2) {
  if (st.t < 1) throw InputError("state was never initialized (t < 1)");
  if (st.t == 1) return false;  // first step ignores the token feedback
  if (!x1.defined() || !x2.defined())
    throw InputError("feedback embeddings required after the first step");
  return true;
}

// All-sigmoid memory branch: in/forget/out and the candidate are sigmoid
// squashed, as is the exposed state.
PlainCellState memory_branch(const std::vector<GateWeights>& gates,
                             const Tensor& own, const Tensor& cross,
                             const Tensor& c_prev, const Tensor& x,
                             bool use_x) {
  Tensor i = sigmoid(gate_pre(gates[gate::kIn], own, cross, x, use_x));
  Tensor f = sigmoid(gate_pre(gates[gate::kForget], own, cross, x, use_x));
  Tensor o = sigmoid(gate_pre(gates[gate::kOut], own, cross, x, use_x));
  Tensor g = sigmoid(gate_pre(gates[gate::kCand], own, cross, x, use_x));
  Tensor c = add(mul(f, c_prev), mul(i, g));
  return {mul(o, sigmoid(c)), c};
}

CrurState step_lstm(const CrurState& st, const Tensor& x1, const Tensor& x2,
                    const CrurParams& params) {
  if (!st.c1.defined() || !st.c2.defined())
    throw InputError("memory-cell state is missing its branch memories");
  const bool use_x = indicator_on(st, x1, x2);
  PlainCellState b1 =
      memory_branch(params.branch1.gates, st.s, st.p, st.c1, x1, use_x);
  PlainCellState b2 =
      memory_branch(params.branch2.gates, st.p, st.s, st.c2, x2, use_x);
  return {b1.h, b2.h, b1.c, b2.c, st.t + 1};
}

// Update/reset-gated branch; the candidate reads the reset-gated state and,
// in the closed variant, additionally the update-gated state.
Tensor gru_branch(const std::vector<GateWeights>& gates, const Tensor& own,
                  const Tensor& cross, const Tensor& x, bool use_x) {
  Tensor z = sigmoid(gate_pre(gates[gate::kUpdate], own, cross, x, use_x));
  Tensor r = sigmoid(gate_pre(gates[gate::kReset], own, cross, x, use_x));
  const GateWeights& cw = gates[gate::kGruCand];
  Tensor pre = vec_mat(mul(r, own), cw.from_own);
  if (cw.from_carry.defined())
    pre = add(pre, vec_mat(mul(z, own), cw.from_carry));
  if (use_x) pre = add(pre, vec_mat(x, cw.from_x));
  Tensor cand = ops::tanh(pre);
  Tensor keep = mul(z, own);
  Tensor blend = mul(sub(Tensor::full(z.shape(), 1.0), z), cand);
  return add(keep, blend);
}

CrurState step_gru(const CrurState& st, const Tensor& x1, const Tensor& x2,
                   const CrurParams& params) {
  const bool use_x = indicator_on(st, x1, x2);
  Tensor s = gru_branch(params.branch1.gates, st.s, st.p, x1, use_x);
  Tensor p = gru_branch(params.branch2.gates, st.p, st.s, x2, use_x);
  return {s, p, Tensor(), Tensor(), st.t + 1};
}

CrurState step_rnn(const CrurState& st, const Tensor& x1, const Tensor& x2,
                   const CrurParams& params) {
  const bool use_x = indicator_on(st, x1, x2);
  Tensor s = sigmoid(
      gate_pre(params.branch1.gates[gate::kSingle], st.s, st.p, x1, use_x));
  Tensor p = sigmoid(
      gate_pre(params.branch2.gates[gate::kSingle], st.p, st.s, x2, use_x));
  return {s, p, Tensor(), Tensor(), st.t + 1};
}

}  // namespace

CrurState init_state(const Tensor& v, const Tensor& w,
                     const CrurParams& params) {
  if (!all_finite(v) || !all_finite(w))
    throw InputError("context features must be finite");
  CrurState st;
  st.s = sigmoid(vec_mat(v, params.init_s));
  st.p = sigmoid(vec_mat(w, params.init_p));
  if (params.cfg.cell_kind == CellKind::kLstm) {
    st.c1 = Tensor::zeros(st.s.shape());
    st.c2 = Tensor::zeros(st.p.shape());
  }
  st.t = 1;
  return st;
}

CrurState step(const CrurState& state, const Tensor& x1, const Tensor& x2,
               const CrurParams& params) {
  switch (params.cfg.cell_kind) {
    case CellKind::kLstm: return step_lstm(state, x1, x2, params);
    case CellKind::kGru: return step_gru(state, x1, x2, params);
    case CellKind::kRnn: return step_rnn(state, x1, x2, params);
  }
  throw ParameterError("unknown cell kind");
}

CrurState step_lstm_open(const CrurState& st, const Tensor& x1,
                         const Tensor& x2, const CrurParams& params) {
  check_kind(params, CellKind::kLstm, Coupling::kOpen, "step_lstm_open");
  return step_lstm(st, x1, x2, params);
}
CrurState step_lstm_closed(const CrurState& st, const Tensor& x1,
                           const Tensor& x2, const CrurParams& params) {
  check_kind(params, CellKind::kLstm, Coupling::kClosed, "step_lstm_closed");
  return step_lstm(st, x1, x2, params);
}
CrurState step_gru_open(const CrurState& st, const Tensor& x1,
                        const Tensor& x2, const CrurParams& params) {
  check_kind(params, CellKind::kGru, Coupling::kOpen, "step_gru_open");
  return step_gru(st, x1, x2, params);
}
CrurState step_gru_closed(const CrurState& st, const Tensor& x1,
                          const Tensor& x2, const CrurParams& params) {
  check_kind(params, CellKind::kGru, Coupling::kClosed, "step_gru_closed");
  return step_gru(st, x1, x2, params);
}
CrurState step_rnn_open(const CrurState& st, const Tensor& x1,
                        const Tensor& x2, const CrurParams& params) {
  check_kind(params, CellKind::kRnn, Coupling::kOpen, "step_rnn_open");
  return step_rnn(st, x1, x2, params);
}
CrurState step_rnn_closed(const CrurState& st, const Tensor& x1,
                          const Tensor& x2, const CrurParams& params) {
  check_kind(params, CellKind::kRnn, Coupling::kClosed, "step_rnn_closed");
  return step_rnn(st, x1, x2, params);
}

StepOutput compose_output(const CrurState& state, const CrurParams& params,
                          const DropoutCtx& dropout) {
  const CrurConfig& cfg = params.cfg;
  Tensor u = sigmoid(mat_vec(params.head_u, state.p));
  Tensor s_mat = ops::reshape(state.s, {cfg.s_rows, cfg.s_cols});
  Tensor f = mat_vec(s_mat, u);
  if (dropout.training && dropout.rate > 0.0) {
    if (!dropout.rng)
      throw ParameterError("training-mode dropout needs a generator");
    f = ops::dropout(f, dropout.rate, true, *dropout.rng);
  }
  Tensor logits = mat_vec(params.head_vocab, f);
  return {u, f, logits};
}

Tensor pos_head(const Tensor& u, const CrurParams& params) {
  return mat_vec(params.head_pos, u);
}

FeedbackState init_feedback_state(const CrurConfig& cfg) {
  FeedbackState fs;
  fs.h1 = Tensor::zeros({cfg.embed_dim});
  fs.c1 = Tensor::zeros({cfg.embed_dim});
  fs.h2 = Tensor::zeros({cfg.embed_dim});
  fs.c2 = Tensor::zeros({cfg.embed_dim});
  return fs;
}

std::pair<Tensor, Tensor> feedback_transform(const Tensor& emb,
                                             const CrurParams& params,
                                             FeedbackState* fb_state) {
  switch (params.cfg.feedback) {
    case FeedbackKind::kShared:
      return {emb, emb};
    case FeedbackKind::kMlp:
      return {mat_vec(params.fb_mlp1, emb), mat_vec(params.fb_mlp2, emb)};
    case FeedbackKind::kMemory: {
      if (!fb_state)
        throw ParameterError(
            "memory feedback needs its stream state (reset per sequence)");
      PlainCellState s1 = plain_cell_step(params.fb_mem.gates1, emb,
                                          {fb_state->h1, fb_state->c1});
      PlainCellState s2 = plain_cell_step(params.fb_mem.gates2, emb,
                                          {fb_state->h2, fb_state->c2});
      fb_state->h1 = s1.h;
      fb_state->c1 = s1.c;
      fb_state->h2 = s2.h;
      fb_state->c2 = s2.c;
      return {s1.h, s2.h};
    }
  }
  throw ParameterError("unknown feedback scheme");
}

PlainCellState plain_cell_step(const std::vector<GateWeights>& gates,
                               const Tensor& x, const PlainCellState& prev) {
  auto pre = [&](int g) {
    return add(vec_mat(x, gates[g].from_x), vec_mat(prev.h, gates[g].from_own));
  };
  Tensor i = sigmoid(pre(gate::kIn));
  Tensor f = sigmoid(pre(gate::kForget));
  Tensor o = sigmoid(pre(gate::kOut));
  Tensor g = sigmoid(pre(gate::kCand));
  Tensor c = add(mul(f, prev.c), mul(i, g));
  return {mul(o, sigmoid(c)), c};
}

BiLstmTrace bilstm_run(const std::vector<int>& seq, const BiLstmParams& p) {
  if (seq.empty()) throw InputError("sequence classifier needs input tokens");
  for (int tok : seq)
    if (tok < 0 || tok >= p.vocab)
      throw IndexError("token " + std::to_string(tok) +
                       " outside vocabulary of size " + std::to_string(p.vocab));
  BiLstmTrace trace;
  PlainCellState fwd = {Tensor::zeros({p.hidden_dim}),
                        Tensor::zeros({p.hidden_dim})};
  for (int tok : seq) {
    fwd = plain_cell_step(p.fwd, ops::row(p.embed, tok), fwd);
    trace.fwd.push_back(fwd.h);
  }
  PlainCellState bwd = {Tensor::zeros({p.hidden_dim}),
                        Tensor::zeros({p.hidden_dim})};
  for (auto it = seq.rbegin(); it != seq.rend(); ++it) {
    bwd = plain_cell_step(p.bwd, ops::row(p.embed, *it), bwd);
    trace.bwd.push_back(bwd.h);
  }
  return trace;
}

Tensor bilstm_classify(const std::vector<int>& seq, const BiLstmParams& p) {
  BiLstmTrace trace = bilstm_run(seq, p);
  return add(mat_vec(p.out_fwd, trace.fwd.back()),
             mat_vec(p.out_bwd, trace.bwd.back()));
}

}  // namespace crur
