#include "crur/train.h"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "crur/cells.h"
#include "crur/error.h"
#include "crur/generate.h"
#include "crur/metrics.h"
#include "crur/tokens.h"

namespace crur {

namespace {

// RNG stream tags; epoch/step indices are added so every pass draws fresh.
constexpr uint64_t kStreamXent = 0x10000;
constexpr uint64_t kStreamScst = 0x20000;

// Argmax over raw logit values with the start marker excluded — the token
// the decoder would actually propose. Ties go to the lowest index.
int masked_argmax(const Tensor& logits) {
  int best = -1;
  double best_v = 0;
  for (int i = 0; i < logits.numel(); ++i) {
    if (i == kStart) continue;
    if (best < 0 || logits.at(i) > best_v) {
      best = i;
      best_v = logits.at(i);
    }
  }
  return best;
}

int plain_argmax(const Tensor& x) {
  int best = 0;
  for (int i = 1; i < x.numel(); ++i)
    if (x.at(i) > x.at(best)) best = i;
  return best;
}

// Strips the leading start marker and one trailing end marker.
std::vector<int> body_of(const std::vector<int>& tokens) {
  std::vector<int> body;
  size_t begin = !tokens.empty() && tokens[0] == kStart ? 1 : 0;
  size_t end = tokens.size();
  if (end > begin && tokens[end - 1] == kEnd) --end;
  body.assign(tokens.begin() + begin, tokens.begin() + end);
  return body;
}

void watch_all(Tape& tape, const CrurParams& params) {
  params.for_each_param(
      [&](const std::string&, const Tensor& t) { tape.watch(t); });
}

void collect_grads(const Tape& tape, const CrurParams& params,
                   GradAccumulator& acc) {
  params.for_each_param([&](const std::string& name, const Tensor& t) {
    acc.add(name, tape.grad(t));
  });
}

}  // namespace

Tensor normalize_feature(const Tensor& v) {
  if (!v.defined() || v.rank() != 1)
    throw RankError("normalize_feature wants a rank-1 tensor");
  if (v.numel() < 1) throw DimensionError("normalize_feature: empty vector");
  double mean = 0.0;
  for (int i = 0; i < v.numel(); ++i) mean += v.at(i);
  mean /= v.numel();
  Tensor out = v.clone();
  for (int i = 0; i < out.numel(); ++i) out.data()[i] -= mean;
  return out;
}

Tensor normalize_embeddings(const Tensor& table) {
  if (!table.defined() || table.numel() < 1)
    throw DimensionError("normalize_embeddings: empty table");
  double mean = 0.0;
  for (int i = 0; i < table.numel(); ++i) mean += table.at(i);
  mean /= table.numel();
  Tensor out = table.clone();
  for (int i = 0; i < out.numel(); ++i) out.data()[i] -= mean;
  return out;
}

std::vector<EncodedSample> encode_samples(const std::vector<SceneSample>& in,
                                          const Vocab& vocab) {
  std::vector<EncodedSample> out;
  out.reserve(in.size());
  for (const SceneSample& s : in) {
    EncodedSample e;
    e.v = normalize_feature(s.v);
    e.w = s.w.clone();
    for (const auto& ref : s.refs) e.refs.push_back(vocab.encode(ref));
    e.pos = s.pos;
    out.push_back(std::move(e));
  }
  return out;
}

void GradAccumulator::add(const std::string& name, const Tensor& grad) {
  auto& buf = by_name_[name];
  if (buf.empty()) buf.assign(grad.numel(), 0.0);
  if (static_cast<int>(buf.size()) != grad.numel())
    throw DimensionError("gradient size changed for parameter " + name);
  for (int i = 0; i < grad.numel(); ++i) buf[i] += grad.at(i);
}

void GradAccumulator::scale_all(double s) {
  for (auto& [name, buf] : by_name_)
    for (double& g : buf) g *= s;
}

double GradAccumulator::l2_norm() const {
  double sq = 0.0;
  for (const auto& [name, buf] : by_name_)
    for (double g : buf) sq += g * g;
  return std::sqrt(sq);
}

void GradAccumulator::clip_to(double max_norm) {
  const double norm = l2_norm();
  if (norm > max_norm && norm > 0.0) scale_all(max_norm / norm);
}

void GradAccumulator::apply_sgd(CrurParams& params, double lr) const {
  params.for_each_param([&](const std::string& name, Tensor& t) {
    auto it = by_name_.find(name);
    if (it == by_name_.end()) return;
    const std::vector<double>& g = it->second;
    if (static_cast<int>(g.size()) != t.numel())
      throw DimensionError("gradient/parameter size mismatch for " + name);
    for (int i = 0; i < t.numel(); ++i) t.data()[i] -= lr * g[i];
  });
}

void GradAccumulator::clear() { by_name_.clear(); }

PairRollout teacher_forced_pair(const CrurParams& params,
                                const EncodedSample& sample, int ref_index,
                                const TrainConfig& cfg, Rng& rng,
                                bool training_mode) {
  if (ref_index < 0 || ref_index >= static_cast<int>(sample.refs.size()))
    throw IndexError("reference index out of range");
  const std::vector<int>& ref_body = sample.refs[ref_index];
  const std::vector<int>& ref_pos = sample.pos[ref_index];
  if (ref_body.size() != ref_pos.size())
    throw InputError("reference/tag length mismatch");

  std::vector<int> targets = ref_body;
  targets.push_back(kEnd);
  std::vector<int> tag_targets = ref_pos;
  tag_targets.push_back(kTagEnd);
  const int T = static_cast<int>(targets.size());

  DropoutCtx dctx{training_mode, params.cfg.dropout_rate, &rng};
  CrurState st = init_state(sample.v, sample.w, params);
  FeedbackState fs = init_feedback_state(params.cfg);

  PairRollout out;
  out.steps = T;
  Tensor token_nll, tag_nll;
  int prev = kStart;
  for (int t = 0; t < T; ++t) {
    Tensor x1, x2;
    if (t > 0) {
      Tensor emb = ops::row(params.embed, prev);
      emb = ops::dropout(emb, dctx.rate, dctx.training, rng);
      auto fb = feedback_transform(emb, params, &fs);
      x1 = fb.first;
      x2 = fb.second;
    }
    st = step(st, x1, x2, params);
    StepOutput so = compose_output(st, params, dctx);

    Tensor lp = ops::softmax_log(so.logits);
    Tensor step_nll = ops::scale(ops::pick(lp, targets[t]), -1.0);
    token_nll = t == 0 ? step_nll : ops::add(token_nll, step_nll);

    Tensor pos_logits = pos_head(so.u, params);
    if (cfg.pos_loss_weight != 0.0) {
      Tensor plp = ops::softmax_log(pos_logits);
      Tensor pos_nll = ops::scale(ops::pick(plp, tag_targets[t]), -1.0);
      tag_nll = t == 0 ? pos_nll : ops::add(tag_nll, pos_nll);
    }

    const int pred = masked_argmax(so.logits);
    out.predictions.push_back(pred);
    out.correct_tokens += pred == targets[t];
    const int tag_pred = plain_argmax(pos_logits);
    out.tag_predictions.push_back(tag_pred);
    out.correct_tags += tag_pred == tag_targets[t];

    if (t + 1 < T) {
      prev = rng.bernoulli(cfg.jitter_prob) ? pred : targets[t];
      out.fed_tokens.push_back(prev);
    }
  }

  out.loss = ops::scale(token_nll, 1.0 / T);
  if (tag_nll.defined())
    out.loss =
        ops::add(out.loss, ops::scale(tag_nll, cfg.pos_loss_weight / T));
  return out;
}

EpochStats xent_train_epoch(CrurParams& params,
                            const std::vector<EncodedSample>& corpus,
                            const TrainConfig& cfg, int epoch) {
  if (corpus.empty()) throw InputError("empty training corpus");
  Rng base(cfg.seed);
  GradAccumulator acc;
  int in_batch = 0;
  EpochStats stats;
  double loss_sum = 0.0;
  long long tok_hits = 0, tag_hits = 0, steps = 0;

  auto flush = [&]() {
    if (in_batch == 0) return;
    acc.scale_all(1.0 / in_batch);
    acc.clip_to(cfg.grad_clip);
    acc.apply_sgd(params, cfg.learning_rate);
    acc.clear();
    in_batch = 0;
  };

  for (size_t si = 0; si < corpus.size(); ++si) {
    Rng sr = base.fork(kStreamXent + static_cast<uint64_t>(epoch), si);
    const EncodedSample& s = corpus[si];
    for (size_t ri = 0; ri < s.refs.size(); ++ri) {
      Tape tape;
      watch_all(tape, params);
      PairRollout pr = teacher_forced_pair(params, s, static_cast<int>(ri),
                                           cfg, sr, /*training=*/true);
      tape.backward(pr.loss);
      collect_grads(tape, params, acc);

      loss_sum += pr.loss.item();
      tok_hits += pr.correct_tokens;
      tag_hits += pr.correct_tags;
      steps += pr.steps;
      ++stats.pairs;
      if (++in_batch == cfg.batch_size) flush();
    }
  }
  flush();

  stats.mean_loss = loss_sum / stats.pairs;
  stats.token_accuracy = steps ? static_cast<double>(tok_hits) / steps : 0.0;
  stats.pos_accuracy = steps ? static_cast<double>(tag_hits) / steps : 0.0;
  return stats;
}

RewardFn reward_for(RewardMetric metric) {
  if (metric == RewardMetric::kCiderdLite)
    return [](const std::vector<int>& body,
              const std::vector<std::vector<int>>& refs) {
      return ciderd_lite({body}, {refs});
    };
  return [](const std::vector<int>& body,
            const std::vector<std::vector<int>>& refs) {
    return sentence_bleu4(body, refs);
  };
}

ScstStats scst_step_with_reward(CrurParams& params,
                                const std::vector<EncodedSample>& batch,
                                const TrainConfig& cfg, int step_index,
                                const RewardFn& reward) {
  if (batch.empty()) throw InputError("empty SCST batch");
  Rng base(cfg.seed);
  const int b = static_cast<int>(batch.size());
  GradAccumulator acc;
  ScstStats stats;
  bool any_grad = false;

  for (int i = 0; i < b; ++i) {
    const EncodedSample& s = batch[i];
    Rng sr = base.fork(kStreamScst + static_cast<uint64_t>(step_index),
                       static_cast<uint64_t>(i));

    // Greedy baseline outside any tape so nothing is recorded.
    const double r_greedy =
        reward(body_of(greedy_decode(params, s.v, s.w, cfg.max_len)), s.refs);

    // Multinomial rollout under the tape; sampling reads the masked
    // distribution the decoder exposes, so the start marker is never drawn.
    Tape tape;
    watch_all(tape, params);
    CrurState st = init_state(s.v, s.w, params);
    FeedbackState fs = init_feedback_state(params.cfg);
    Tensor log_sum;
    std::vector<int> emitted;
    int prev = kStart;
    for (int t = 1; t < cfg.max_len; ++t) {
      Tensor x1, x2;
      if (t > 1) {
        Tensor emb = ops::row(params.embed, prev);
        auto fb = feedback_transform(emb, params, &fs);
        x1 = fb.first;
        x2 = fb.second;
      }
      st = step(st, x1, x2, params);
      StepOutput so = compose_output(st, params, DropoutCtx{});
      Tensor lp = masked_log_probs(so.logits);

      double draw = sr.uniform();
      int tok = -1;
      double cum = 0.0;
      for (int c = 0; c < lp.numel(); ++c) {
        if (c == kStart) continue;
        cum += std::exp(lp.at(c));
        if (draw < cum) {
          tok = c;
          break;
        }
      }
      if (tok < 0) {  // guard against rounding at the top of the CDF
        tok = lp.numel() - 1;
        if (tok == kStart) --tok;
      }

      Tensor t_lp = ops::pick(lp, tok);
      log_sum = log_sum.defined() ? ops::add(log_sum, t_lp) : t_lp;
      emitted.push_back(tok);
      prev = tok;
      if (tok == kEnd) break;
    }

    std::vector<int> body = body_of(emitted);
    const double r_sampled = body.empty() ? 0.0 : reward(body, s.refs);
    const double advantage = body.empty() ? 0.0 : r_sampled - r_greedy;
    stats.mean_sampled_reward += r_sampled;
    stats.mean_greedy_reward += r_greedy;

    if (advantage != 0.0 && log_sum.defined()) {
      Tensor loss = ops::scale(log_sum, -advantage / b);
      tape.backward(loss);
      collect_grads(tape, params, acc);
      any_grad = true;
    }
  }

  if (any_grad) {
    acc.clip_to(cfg.grad_clip);
    acc.apply_sgd(params, cfg.learning_rate);
  }
  stats.mean_sampled_reward /= b;
  stats.mean_greedy_reward /= b;
  return stats;
}

ScstStats scst_step(CrurParams& params,
                    const std::vector<EncodedSample>& batch,
                    const TrainConfig& cfg, int step_index) {
  return scst_step_with_reward(params, batch, cfg, step_index,
                               reward_for(cfg.reward_metric));
}

double corpus_bleu4(const CrurParams& params,
                    const std::vector<EncodedSample>& corpus, int max_len) {
  if (corpus.empty()) throw InputError("empty corpus");
  std::vector<std::vector<int>> cands;
  std::vector<std::vector<std::vector<int>>> refs;
  for (const EncodedSample& s : corpus) {
    cands.push_back(body_of(greedy_decode(params, s.v, s.w, max_len)));
    refs.push_back(s.refs);
  }
  return bleu_n(cands, refs, 4);
}

std::string epoch_log_line(int epoch, const EpochStats& stats,
                           double bleu4_train) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(6);
  os << epoch << '\t' << stats.mean_loss << '\t' << stats.token_accuracy
     << '\t' << stats.pos_accuracy << '\t' << bleu4_train;
  return os.str();
}

}  // namespace crur
