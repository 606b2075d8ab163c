#include "crur/params.h"

#include "crur/error.h"

namespace crur {

namespace {

const char* const kLstmGateNames[] = {"in", "forget", "out", "cand"};
const char* const kGruGateNames[] = {"update", "reset", "cand"};
const char* const kRnnGateNames[] = {"gate"};

struct GateNameTable {
  const char* const* names;
  int count;
};

GateNameTable gate_names(CellKind kind) {
  switch (kind) {
    case CellKind::kLstm: return {kLstmGateNames, 4};
    case CellKind::kGru: return {kGruGateNames, 3};
    case CellKind::kRnn: return {kRnnGateNames, 1};
  }
  throw ParameterError("unknown cell kind");
}

// Allocates one recurrent branch.  out_dim is the branch's state width,
// cross_dim the other branch's.
BranchParams make_branch(CellKind kind, Coupling coupling, int embed_dim,
                         int out_dim, int cross_dim) {
  BranchParams b;
  const int n = gate_names(kind).count;
  b.gates.resize(n);
  const bool closed = coupling == Coupling::kClosed;
  for (int g = 0; g < n; ++g) {
    GateWeights& w = b.gates[g];
    w.from_x = Tensor::zeros({embed_dim, out_dim});
    w.from_own = Tensor::zeros({out_dim, out_dim});
    const bool is_gru_cand = kind == CellKind::kGru && g == gate::kGruCand;
    if (closed && !is_gru_cand)
      w.from_cross = Tensor::zeros({cross_dim, out_dim});
    if (closed && is_gru_cand)
      w.from_carry = Tensor::zeros({out_dim, out_dim});
  }
  return b;
}

std::vector<GateWeights> make_plain_lstm(int in_dim, int hidden_dim) {
  std::vector<GateWeights> gates(4);
  for (auto& g : gates) {
    g.from_x = Tensor::zeros({in_dim, hidden_dim});
    g.from_own = Tensor::zeros({hidden_dim, hidden_dim});
  }
  return gates;
}

template <typename Fn>
void visit_gate(const std::string& prefix, GateWeights& g, Fn&& fn) {
  if (g.from_x.defined()) fn(prefix + ".x", g.from_x);
  if (g.from_own.defined()) fn(prefix + ".own", g.from_own);
  if (g.from_cross.defined()) fn(prefix + ".cross", g.from_cross);
  if (g.from_carry.defined()) fn(prefix + ".carry", g.from_carry);
}

template <typename Fn>
void visit_branch(const std::string& prefix, CellKind kind, BranchParams& b,
                  Fn&& fn) {
  GateNameTable t = gate_names(kind);
  for (int g = 0; g < t.count; ++g)
    visit_gate(prefix + "." + t.names[g], b.gates[g], fn);
}

template <typename Fn>
void visit_plain_lstm(const std::string& prefix,
                      std::vector<GateWeights>& gates, Fn&& fn) {
  for (int g = 0; g < 4; ++g)
    visit_gate(prefix + "." + kLstmGateNames[g], gates[g], fn);
}

template <typename P, typename Fn>
void visit_crur(P& p, Fn&& fn) {
  fn("embed", p.embed);
  fn("init_s", p.init_s);
  fn("init_p", p.init_p);
  visit_branch("b1", p.cfg.cell_kind, p.branch1, fn);
  visit_branch("b2", p.cfg.cell_kind, p.branch2, fn);
  fn("head_u", p.head_u);
  fn("head_vocab", p.head_vocab);
  fn("head_pos", p.head_pos);
  if (p.cfg.feedback == FeedbackKind::kMlp) {
    fn("fb.mlp1", p.fb_mlp1);
    fn("fb.mlp2", p.fb_mlp2);
  } else if (p.cfg.feedback == FeedbackKind::kMemory) {
    visit_plain_lstm("fb.mem1", p.fb_mem.gates1, fn);
    visit_plain_lstm("fb.mem2", p.fb_mem.gates2, fn);
  }
}

template <typename P>
void fill_uniform(P& p, Rng& rng) {
  p.for_each_param([&rng](const std::string&, Tensor& t) {
    for (int i = 0; i < t.numel(); ++i) t.data()[i] = rng.uniform(-0.08, 0.08);
    t.set_requires_grad(true);
  });
}

}  // namespace

CrurParams CrurParams::init(const CrurConfig& cfg, Rng& rng) {
  cfg.validate();
  CrurParams p;
  p.cfg = cfg;
  const int mk = cfg.s_dim();
  p.embed = Tensor::zeros({cfg.vocab_size, cfg.embed_dim});
  p.init_s = Tensor::zeros({cfg.v_dim, mk});
  p.init_p = Tensor::zeros({cfg.w_dim, cfg.p_dim});
  p.branch1 = make_branch(cfg.cell_kind, cfg.coupling, cfg.embed_dim, mk,
                          cfg.p_dim);
  p.branch2 = make_branch(cfg.cell_kind, cfg.coupling, cfg.embed_dim,
                          cfg.p_dim, mk);
  p.head_u = Tensor::zeros({cfg.s_cols, cfg.p_dim});
  p.head_vocab = Tensor::zeros({cfg.vocab_size, cfg.s_rows});
  p.head_pos = Tensor::zeros({cfg.pos_classes, cfg.s_cols});
  if (cfg.feedback == FeedbackKind::kMlp) {
    p.fb_mlp1 = Tensor::zeros({cfg.embed_dim, cfg.embed_dim});
    p.fb_mlp2 = Tensor::zeros({cfg.embed_dim, cfg.embed_dim});
  } else if (cfg.feedback == FeedbackKind::kMemory) {
    p.fb_mem.gates1 = make_plain_lstm(cfg.embed_dim, cfg.embed_dim);
    p.fb_mem.gates2 = make_plain_lstm(cfg.embed_dim, cfg.embed_dim);
  }
  fill_uniform(p, rng);
  return p;
}

void CrurParams::for_each_param(
    const std::function<void(const std::string&, Tensor&)>& fn) {
  visit_crur(*this, fn);
}

void CrurParams::for_each_param(
    const std::function<void(const std::string&, const Tensor&)>& fn) const {
  visit_crur(const_cast<CrurParams&>(*this),
             [&fn](const std::string& n, Tensor& t) { fn(n, t); });
}

DecoderParams DecoderParams::init(const CrurConfig& cfg, Rng& rng) {
  cfg.validate();
  DecoderParams d;
  d.cfg = cfg;
  d.gates = make_plain_lstm(cfg.embed_dim + cfg.s_rows, cfg.decoder_dim);
  d.out_w = Tensor::zeros({cfg.vocab_size, cfg.decoder_dim});
  d.h0_w = Tensor::zeros({cfg.decoder_dim, cfg.s_rows});
  fill_uniform(d, rng);
  return d;
}

void DecoderParams::for_each_param(
    const std::function<void(const std::string&, Tensor&)>& fn) {
  visit_plain_lstm("dec", gates, fn);
  fn("dec.out", out_w);
  fn("dec.h0", h0_w);
}

void DecoderParams::for_each_param(
    const std::function<void(const std::string&, const Tensor&)>& fn) const {
  const_cast<DecoderParams*>(this)->for_each_param(
      [&fn](const std::string& n, Tensor& t) { fn(n, t); });
}

BiLstmParams BiLstmParams::init(int vocab, int embed_dim, int hidden_dim,
                                int n_out, Rng& rng) {
  if (vocab <= 0 || embed_dim <= 0 || hidden_dim <= 0 || n_out <= 0)
    throw ParameterError("bilstm dimensions must be positive");
  BiLstmParams p;
  p.vocab = vocab;
  p.embed_dim = embed_dim;
  p.hidden_dim = hidden_dim;
  p.n_out = n_out;
  p.embed = Tensor::zeros({vocab, embed_dim});
  p.fwd = make_plain_lstm(embed_dim, hidden_dim);
  p.bwd = make_plain_lstm(embed_dim, hidden_dim);
  p.out_fwd = Tensor::zeros({n_out, hidden_dim});
  p.out_bwd = Tensor::zeros({n_out, hidden_dim});
  fill_uniform(p, rng);
  return p;
}

void BiLstmParams::for_each_param(
    const std::function<void(const std::string&, Tensor&)>& fn) {
  fn("embed", embed);
  visit_plain_lstm("fwd", fwd, fn);
  visit_plain_lstm("bwd", bwd, fn);
  fn("out_fwd", out_fwd);
  fn("out_bwd", out_bwd);
}

}  // namespace crur
