#include "crur/generate.h"

#include <algorithm>
#include <numeric>

#include "crur/error.h"
#include "crur/tokens.h"

namespace crur {

namespace {

// Core advance driven by the hypothesis's own last token.  The first
// advance (only the start marker so far) runs with the indicator off.
void advance_core(Hypothesis& h, const CrurParams& params) {
  if (h.tokens.size() == 1) {
    h.state = step(h.state, Tensor(), Tensor(), params);
    return;
  }
  Tensor emb = ops::row(params.embed, h.tokens.back());
  auto [x1, x2] = feedback_transform(emb, params, &h.fb);
  h.state = step(h.state, x1, x2, params);
}

double rank_score(const Hypothesis& h, bool length_normalize) {
  if (!length_normalize) return h.log_prob;
  int emitted = static_cast<int>(h.tokens.size()) - 1;
  return emitted > 0 ? h.log_prob / emitted : h.log_prob;
}

// Deterministic ranking: score, then shorter, then lexicographic tokens.
void rank(std::vector<Hypothesis>& hs, bool length_normalize) {
  std::stable_sort(hs.begin(), hs.end(),
                   [&](const Hypothesis& a, const Hypothesis& b) {
                     double sa = rank_score(a, length_normalize);
                     double sb = rank_score(b, length_normalize);
                     if (sa != sb) return sa > sb;
                     if (a.tokens.size() != b.tokens.size())
                       return a.tokens.size() < b.tokens.size();
                     return a.tokens < b.tokens;
                   });
}

Hypothesis make_root(const CrurParams& params, const Tensor& v,
                     const Tensor& w, int max_len) {
  if (max_len < 1) throw ParameterError("max_len must be at least 1");
  Hypothesis h;
  h.tokens = {kStart};
  h.state = init_state(v, w, params);
  h.fb = init_feedback_state(params.cfg);
  h.finished = max_len == 1;
  return h;
}

}  // namespace

Tensor masked_log_probs(const Tensor& logits) {
  if (logits.rank() != 1)
    throw RankError("log-prob mask expects a rank-1 logit vector");
  if (logits.numel() <= kStart)
    throw DimensionError("logit vector too small for the reserved tokens");
  Tensor mask = Tensor::zeros(logits.shape());
  mask.data()[kStart] = -1e30;
  return ops::softmax_log(ops::add(logits, mask));
}

int argmax_index(const Tensor& scores) {
  int best = 0;
  for (int i = 1; i < scores.numel(); ++i)
    if (scores.at(i) > scores.at(best)) best = i;
  return best;
}

Hypothesis greedy_hypothesis(const CrurParams& params, const Tensor& v,
                             const Tensor& w, int max_len) {
  Hypothesis h = make_root(params, v, w, max_len);
  while (static_cast<int>(h.tokens.size()) < max_len) {
    advance_core(h, params);
    StepOutput out = compose_output(h.state, params, {});
    Tensor lp = masked_log_probs(out.logits);
    int tok = argmax_index(lp);
    h.tokens.push_back(tok);
    h.log_prob += lp.at(tok);
    if (tok == kEnd) break;
  }
  h.finished = true;
  return h;
}

std::vector<int> greedy_decode(const CrurParams& params, const Tensor& v,
                               const Tensor& w, int max_len) {
  return greedy_hypothesis(params, v, w, max_len).tokens;
}

std::vector<Hypothesis> beam_search(const CrurParams& params, const Tensor& v,
                                    const Tensor& w, int beam_width,
                                    int max_len, bool length_normalize) {
  if (beam_width < 1) throw ParameterError("beam width must be at least 1");
  std::vector<Hypothesis> pool, live;
  Hypothesis root = make_root(params, v, w, max_len);
  if (root.finished) {
    pool.push_back(root);
    return pool;
  }
  live.push_back(root);

  // The argmax lineage (the hypothesis greedy decoding would follow) is
  // exempt from the width cut: plain beam search can prune that prefix and
  // then return a completion scoring below the greedy baseline.  Protecting
  // the lineage makes best-of-beam >= greedy structural; with B=1 the beam
  // is exactly that lineage, so semantics there are unchanged.
  int protected_idx = 0;  // index into live, -1 once the lineage finished

  while (!live.empty()) {
    std::vector<Hypothesis> cand;
    int protected_cand = -1;
    for (size_t hi = 0; hi < live.size(); ++hi) {
      Hypothesis& h = live[hi];
      advance_core(h, params);
      StepOutput out = compose_output(h.state, params, {});
      Tensor lp = masked_log_probs(out.logits);

      // Top beam_width continuations of this hypothesis.
      std::vector<int> order;
      for (int i = 0; i < lp.numel(); ++i)
        if (i != kStart) order.push_back(i);
      std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        if (lp.at(a) != lp.at(b)) return lp.at(a) > lp.at(b);
        return a < b;
      });
      if (static_cast<int>(order.size()) > beam_width)
        order.resize(beam_width);

      for (size_t oi = 0; oi < order.size(); ++oi) {
        const int tok = order[oi];
        Hypothesis child = h;
        child.tokens.push_back(tok);
        child.log_prob += lp.at(tok);
        const bool on_lineage =
            static_cast<int>(hi) == protected_idx && oi == 0;
        if (tok == kEnd ||
            static_cast<int>(child.tokens.size()) == max_len) {
          child.finished = true;
          pool.push_back(child);
        } else {
          if (on_lineage) protected_cand = static_cast<int>(cand.size());
          cand.push_back(child);
        }
      }
    }

    // Global cut; carry the unfinished lineage member along if it lost.
    Hypothesis lineage;
    bool lineage_live = protected_cand >= 0;
    if (lineage_live) lineage = cand[protected_cand];
    rank(cand, false);
    if (static_cast<int>(cand.size()) > beam_width) cand.resize(beam_width);
    protected_idx = -1;
    if (lineage_live) {
      for (size_t i = 0; i < cand.size(); ++i)
        if (cand[i].tokens == lineage.tokens) {
          protected_idx = static_cast<int>(i);
          break;
        }
      if (protected_idx < 0) {
        cand.push_back(lineage);
        protected_idx = static_cast<int>(cand.size()) - 1;
      }
    }
    live = std::move(cand);
  }

  rank(pool, length_normalize);
  return pool;
}

namespace {

struct DecoderRun {  // shared loop for free decoding and forced loss
  const CrurParams& params;
  const DecoderParams& dec;
  AttnInit init_mode;
  CrurState st;
  FeedbackState fs;
  PlainCellState dh;
  bool started = false;

  // Advances the core past `prev`, feeds the decoder, returns log-probs.
  Tensor next_log_probs(int prev) {
    if (!started && init_mode != AttnInit::kConstant &&
        init_mode != AttnInit::kFromF)
      throw ParameterError("unknown decoder initialization mode");
    if (st.t == 1) {
      st = step(st, Tensor(), Tensor(), params);
    } else {
      Tensor emb = ops::row(params.embed, prev);
      auto [x1, x2] = feedback_transform(emb, params, &fs);
      st = step(st, x1, x2, params);
    }
    StepOutput out = compose_output(st, params, {});
    if (!started) {
      dh.c = Tensor::zeros({dec.cfg.decoder_dim});
      dh.h = init_mode == AttnInit::kFromF
                 ? ops::mat_vec(dec.h0_w, out.f)
                 : Tensor::zeros({dec.cfg.decoder_dim});
      started = true;
    }
    Tensor dec_in = ops::concat(ops::row(params.embed, prev), out.f);
    dh = plain_cell_step(dec.gates, dec_in, dh);
    return masked_log_probs(ops::mat_vec(dec.out_w, dh.h));
  }
};

}  // namespace

std::vector<int> attn_decode(const CrurParams& params,
                             const DecoderParams& dec, const Tensor& v,
                             const Tensor& w, int max_len,
                             AttnInit init_mode) {
  if (max_len < 1) throw ParameterError("max_len must be at least 1");
  DecoderRun run{params, dec, init_mode, init_state(v, w, params),
                 init_feedback_state(params.cfg), {}, false};
  std::vector<int> out = {kStart};
  while (static_cast<int>(out.size()) < max_len) {
    Tensor lp = run.next_log_probs(out.back());
    int tok = argmax_index(lp);
    out.push_back(tok);
    if (tok == kEnd) break;
  }
  return out;
}

Tensor attn_forced_loss(const CrurParams& params, const DecoderParams& dec,
                        const Tensor& v, const Tensor& w,
                        const std::vector<int>& body, AttnInit init_mode) {
  DecoderRun run{params, dec, init_mode, init_state(v, w, params),
                 init_feedback_state(params.cfg), {}, false};
  std::vector<int> targets = body;
  targets.push_back(kEnd);
  Tensor total = Tensor::zeros({1});
  int prev = kStart;
  for (int target : targets) {
    Tensor lp = run.next_log_probs(prev);
    total = ops::add(total, ops::scale(ops::pick(lp, target), -1.0));
    prev = target;
  }
  return total;
}

}  // namespace crur
