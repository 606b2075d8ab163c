// Command-line front end: data generation, training, evaluation, captioning
// and the two verification commands (TPR retrieval demo, gradient check).
//
// Exit codes: 0 success, 1 usage/config error, 2 data error (I/O, parse,
// schema, checkpoint, bad inputs), 3 verification failure.

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "crur/cells.h"
#include "crur/checkpoint.h"
#include "crur/config.h"
#include "crur/corpus.h"
#include "crur/error.h"
#include "crur/fdcheck.h"
#include "crur/generate.h"
#include "crur/hadamard.h"
#include "crur/metrics.h"
#include "crur/params.h"
#include "crur/rng.h"
#include "crur/tokens.h"
#include "crur/train.h"

namespace {

using namespace crur;

// ---------------------------------------------------------------- helpers

std::optional<uint64_t> env_seed_override() {
  const char* s = std::getenv("CRUR_SEED");
  if (s == nullptr || *s == '\0') return std::nullopt;
  char* end = nullptr;
  errno = 0;
  const unsigned long long v = std::strtoull(s, &end, 10);
  if (errno != 0 || end == s || *end != '\0')
    throw ConfigError("CRUR_SEED must be an unsigned integer, got '" +
                      std::string(s) + "'");
  return static_cast<uint64_t>(v);
}

std::vector<int> strip_markers(std::vector<int> tokens) {
  if (!tokens.empty() && tokens.front() == kStart)
    tokens.erase(tokens.begin());
  if (!tokens.empty() && tokens.back() == kEnd) tokens.pop_back();
  return tokens;
}

DecoderKind parse_decoder(const std::string& name) {
  if (name == "head") return DecoderKind::kHead;
  if (name == "attn") return DecoderKind::kAttn;
  throw ConfigError("unknown decoder '" + name + "' (head or attn)");
}

// The checkpoint stores only the core model; the recurrent decoder used by
// attn decoding is derived deterministically from the checkpoint seed on a
// stream of its own.
DecoderParams derive_decoder(const Checkpoint& ck) {
  Rng rng = Rng(ck.seed).fork(0x30000, 0);
  return DecoderParams::init(ck.configs.model, rng);
}

struct DecodeResult {
  std::vector<int> raw;   // with start/end markers as emitted
  std::vector<int> body;  // markers stripped
  double log_prob = 0.0;
};

// One sample under the selected scheme.  The reported score is the total
// log-likelihood of the caption ending after the shown words (the END step
// included), matching the hypothesis scores of the head decoders.
DecodeResult decode_one(const CrurParams& params, const DecoderParams* dec,
                        const Tensor& v, const Tensor& w, DecoderKind kind,
                        int beam, int max_len, bool length_normalize,
                        AttnInit init_mode) {
  DecodeResult r;
  if (kind == DecoderKind::kAttn) {
    r.raw = attn_decode(params, *dec, v, w, max_len, init_mode);
    r.body = strip_markers(r.raw);
    r.log_prob =
        -attn_forced_loss(params, *dec, v, w, r.body, init_mode).item();
    return r;
  }
  if (beam > 1) {
    const std::vector<Hypothesis> pool =
        beam_search(params, v, w, beam, max_len, length_normalize);
    r.raw = pool.front().tokens;
    r.log_prob = pool.front().log_prob;
  } else {
    const Hypothesis h = greedy_hypothesis(params, v, w, max_len);
    r.raw = h.tokens;
    r.log_prob = h.log_prob;
  }
  r.body = strip_markers(r.raw);
  return r;
}

std::string fixed6(double x) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(6) << x;
  return ss.str();
}

std::string sci2(double x) {
  std::ostringstream ss;
  ss << std::scientific << std::setprecision(2) << x;
  return ss.str();
}

void append_line(const std::string& path, const std::string& line) {
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw IoError("cannot open log for append: " + path);
  out << line << "\n";
  if (!out) throw IoError("write failed: " + path);
}

// ------------------------------------------------------------- subcommands

struct GenDataArgs {
  std::string out;
  int n = 200;
  uint64_t seed = 7;
  std::string config;
};

int cmd_gen_data(const GenDataArgs& a) {
  CrurConfig model;
  if (!a.config.empty()) model = load_config_file(a.config).model;
  const Corpus corpus = generate_corpus(a.n, a.seed, model);
  std::filesystem::create_directories(a.out);
  const struct {
    const char* name;
    const std::vector<SceneSample>& split;
  } splits[] = {{"train.jsonl", corpus.train},
                {"val.jsonl", corpus.val},
                {"test.jsonl", corpus.test}};
  for (const auto& s : splits) {
    const std::string path = (std::filesystem::path(a.out) / s.name).string();
    save_split(s.split, path);
    std::cout << "wrote " << path << " (" << s.split.size() << " scenes)\n";
  }
  return 0;
}

struct TrainArgs {
  std::string config, data, out, resume, log;
};

// Serialized model section only, so resume can insist on identical geometry
// while leaving the schedule (epochs, SCST steps) free to change.
std::string model_text(const CrurConfig& model) {
  ConfigBundle probe;
  probe.model = model;
  return config_bundle_to_text(probe);
}

int cmd_train(const TrainArgs& a) {
  if (a.config.empty())
    throw ConfigError("train needs --config (plus --resume to continue)");

  Checkpoint ck;
  ck.configs = load_config_file(a.config);
  if (const auto seed = env_seed_override()) ck.configs.train.seed = *seed;
  ck.seed = ck.configs.train.seed;

  const std::string train_path =
      (std::filesystem::path(a.data) / "train.jsonl").string();
  const std::vector<SceneSample> samples = load_corpus(train_path);

  const bool resuming = !a.resume.empty();
  if (resuming) {
    const Checkpoint prev = load_checkpoint(a.resume);
    if (ck.configs.model.vocab_size == 0)
      ck.configs.model.vocab_size = prev.configs.model.vocab_size;
    if (model_text(ck.configs.model) != model_text(prev.configs.model))
      throw ConfigError(
          "resume checkpoint was trained with a different model config");
    ck.configs.model.validate();
    ck.configs.train.validate();
    ck.vocab = prev.vocab;
    ck.params = prev.params;
    ck.epoch = prev.epoch;
  } else {
    VocabResult vr = build_vocab(samples, ck.configs.model.embed_dim,
                                 ck.configs.train.seed);
    if (ck.configs.model.vocab_size == 0) {
      ck.configs.model.vocab_size = vr.vocab.size();
    } else if (ck.configs.model.vocab_size != vr.vocab.size()) {
      throw ConfigError("config vocab_size " +
                        std::to_string(ck.configs.model.vocab_size) +
                        " does not match corpus vocabulary " +
                        std::to_string(vr.vocab.size()));
    }
    ck.configs.model.validate();
    ck.configs.train.validate();
    ck.vocab = vr.vocab;
    ck.epoch = 0;
    Rng rng(ck.configs.train.seed);
    ck.params = CrurParams::init(ck.configs.model, rng);
    // The model's word embeddings start from the vocabulary table, which is
    // already centered (global-mean normalization).
    const Tensor& table = vr.table.matrix;
    for (int i = 0; i < table.numel(); ++i)
      ck.params.embed.data()[i] = table.data()[i];
  }

  const std::vector<EncodedSample> enc = encode_samples(samples, ck.vocab);
  const TrainConfig& tc = ck.configs.train;
  const std::string log_path = a.log.empty() ? a.out + ".log" : a.log;

  for (int e = ck.epoch; e < tc.epochs; ++e) {
    const EpochStats stats = xent_train_epoch(ck.params, enc, tc, e);
    const double bleu = corpus_bleu4(ck.params, enc, tc.max_len);
    const std::string line = epoch_log_line(e + 1, stats, bleu);
    append_line(log_path, line);
    std::cout << line << "\n";
    ck.epoch = e + 1;
    save_checkpoint(ck, a.out);
  }

  if (tc.scst_enabled) {
    const int done = std::max(0, ck.epoch - tc.epochs);
    for (int s = done; s < tc.scst_steps; ++s) {
      std::vector<EncodedSample> batch;
      for (int j = 0; j < tc.batch_size; ++j)
        batch.push_back(
            enc[(static_cast<size_t>(s) * tc.batch_size + j) % enc.size()]);
      const ScstStats st = scst_step(ck.params, batch, tc, s);
      std::ostringstream line;
      line << "scst\t" << (s + 1) << "\t" << fixed6(st.mean_sampled_reward)
           << "\t" << fixed6(st.mean_greedy_reward);
      append_line(log_path, line.str());
      std::cout << line.str() << "\n";
      ck.epoch = tc.epochs + s + 1;
      save_checkpoint(ck, a.out);
    }
  }

  // A schedule that is already complete still refreshes the output file so
  // resumed and uninterrupted runs end with identical artifacts.
  save_checkpoint(ck, a.out);
  std::cout << "done: " << a.out << " (unit " << ck.epoch << ")\n";
  return 0;
}

struct EvalArgs {
  std::string ckpt, data, decoder;
  int beam = 1;
  int max_len = 0;
  bool length_normalize = false;
  bool pass_through = false;
};

int cmd_eval(const EvalArgs& a) {
  const Checkpoint ck = load_checkpoint(a.ckpt);
  const std::vector<SceneSample> samples = load_corpus(a.data);
  const std::vector<EncodedSample> enc = encode_samples(samples, ck.vocab);

  const DecoderKind kind = a.decoder.empty() ? ck.configs.train.decoder
                                             : parse_decoder(a.decoder);
  const int max_len = a.max_len > 0 ? a.max_len : ck.configs.train.max_len;
  std::optional<DecoderParams> dec;
  if (kind == DecoderKind::kAttn) dec = derive_decoder(ck);

  TrainConfig pos_cfg = ck.configs.train;
  pos_cfg.jitter_prob = 0.0;

  std::vector<TokenSeq> cands, pos_pred, pos_gold;
  std::vector<RefSet> refs;
  for (const EncodedSample& s : enc) {
    if (a.pass_through) {
      cands.push_back(s.refs.at(0));
    } else {
      cands.push_back(decode_one(ck.params, dec ? &*dec : nullptr, s.v, s.w,
                                 kind, a.beam, max_len, a.length_normalize,
                                 ck.configs.model.attn_init)
                          .body);
    }
    refs.emplace_back(s.refs.begin(), s.refs.end());

    TokenSeq gold = s.pos.at(0);
    gold.push_back(kTagEnd);
    if (a.pass_through) {
      pos_pred.push_back(gold);
    } else {
      Rng unused(0);
      pos_pred.push_back(
          teacher_forced_pair(ck.params, s, 0, pos_cfg, unused, false)
              .tag_predictions);
    }
    pos_gold.push_back(std::move(gold));
  }

  const EvalReport report = evaluate_corpus(cands, refs, pos_pred, pos_gold);
  std::cout << report_to_json(report) << "\n";
  return 0;
}

struct CaptionArgs {
  std::string ckpt, data, decoder;
  int sample_id = -1;
  int beam = 1;
  int max_len = 0;
  bool length_normalize = false;
};

int cmd_caption(const CaptionArgs& a) {
  const Checkpoint ck = load_checkpoint(a.ckpt);
  const std::vector<SceneSample> samples = load_corpus(a.data);
  const SceneSample* found = nullptr;
  for (const SceneSample& s : samples)
    if (s.scene_id == a.sample_id) {
      found = &s;
      break;
    }
  if (found == nullptr)
    throw InputError("unknown sample id " + std::to_string(a.sample_id));

  const EncodedSample enc = encode_samples({*found}, ck.vocab).at(0);
  const DecoderKind kind = a.decoder.empty() ? ck.configs.train.decoder
                                             : parse_decoder(a.decoder);
  const int max_len = a.max_len > 0 ? a.max_len : ck.configs.train.max_len;
  std::optional<DecoderParams> dec;
  if (kind == DecoderKind::kAttn) dec = derive_decoder(ck);

  const DecodeResult r =
      decode_one(ck.params, dec ? &*dec : nullptr, enc.v, enc.w, kind, a.beam,
                 max_len, a.length_normalize, ck.configs.model.attn_init);

  std::ostringstream words;
  for (size_t i = 0; i < r.body.size(); ++i)
    words << (i ? " " : "") << ck.vocab.word_of(r.body[i]);
  std::ostringstream toks;
  for (size_t i = 0; i < r.raw.size(); ++i)
    toks << (i ? " " : "") << ck.vocab.word_of(r.raw[i]);

  std::cout << "scene " << a.sample_id << ": " << words.str() << "\n"
            << "log-prob: " << fixed6(r.log_prob) << "\n"
            << "tokens: " << toks.str() << "\n";
  return 0;
}

struct TprDemoArgs {
  int k = 3;
  int vocab = 500;
  int dim = 50;
  int trials = 1000;
  uint64_t seed = 1;
};

int cmd_tpr_demo(const TprDemoArgs& a) {
  if (a.k < 0 || a.k > 10)
    throw ParameterError("k must lie in [0, 10], got " + std::to_string(a.k));
  if (a.vocab < 1 || a.dim < 1 || a.trials < 1)
    throw ParameterError("vocab, dim and trials must be positive");

  const HadamardRoles roles = hadamard_generate(a.k);
  Rng rng(a.seed);
  const EmbeddingTable table = EmbeddingTable::random(a.vocab, a.dim, rng);
  const int capacity = roles.count();

  long long positions = 0, hits = 0;
  double max_err = 0.0;
  int capacity_violations = 0;
  for (int trial = 0; trial < a.trials; ++trial) {
    const int len = 1 + rng.uniform_int(capacity);
    std::vector<int> tokens;
    for (int i = 0; i < len; ++i) tokens.push_back(rng.uniform_int(a.vocab));
    try {
      const BoundRepresentation s = bind_sequence(tokens, table, roles);
      for (int j = 0; j < len; ++j) {
        const Tensor u = unbind(s, j, roles);
        const Tensor e = table.embedding(tokens[j]);
        for (int i = 0; i < u.numel(); ++i)
          max_err = std::max(max_err, std::fabs(u.data()[i] - e.data()[i]));
        hits += nn_retrieve(u, table) == tokens[j];
        ++positions;
      }
    } catch (const CapacityError& e) {
      std::cerr << "trial " << trial << ": " << e.what() << "\n";
      ++capacity_violations;
    }
  }
  if (capacity_violations > 0) {
    std::cerr << capacity_violations << " trials exceeded capacity\n";
    return 2;
  }

  // Role-basis mixing demo over as many random signals as there are roles.
  std::vector<Tensor> signals;
  for (int i = 0; i < capacity; ++i) {
    std::vector<double> sig(a.dim);
    for (double& x : sig) x = rng.gaussian();
    signals.push_back(Tensor::from_data({a.dim}, std::move(sig)));
  }
  const double spectrum_err = spectrum_demo(signals, roles);

  const double accuracy =
      positions == 0 ? 0.0 : double(hits) / double(positions);
  std::cout << "sequences: " << a.trials << "  positions: " << positions
            << "\n";
  std::cout << "retrieval accuracy: " << std::fixed << std::setprecision(4)
            << accuracy << "\n";
  std::cout << "max unbind L-inf error: " << sci2(max_err) << "\n";
  std::cout << "spectrum max error: " << sci2(spectrum_err) << "\n";
  return (hits == positions && max_err < 1e-9) ? 0 : 3;
}

struct GradCheckArgs {
  std::string config;
  int trials = 5;
  bool self_test_corrupt = false;
};

// Small probe geometry: finite differences visit every parameter entry, so
// the model must stay tiny for the check to be fast.
CrurConfig probe_config(CellKind kind, Coupling coupling, FeedbackKind fb) {
  CrurConfig cfg;
  cfg.cell_kind = kind;
  cfg.coupling = coupling;
  cfg.feedback = fb;
  cfg.s_rows = 3;
  cfg.s_cols = 2;
  cfg.p_dim = 2;
  cfg.embed_dim = 2;
  cfg.vocab_size = 6;
  cfg.v_dim = 3;
  cfg.w_dim = 2;
  cfg.pos_classes = 6;
  cfg.dropout_rate = 0.0;
  cfg.decoder_dim = 3;
  return cfg;
}

Tensor random_vec(int n, Rng& rng) {
  std::vector<double> d(n);
  for (double& x : d) x = rng.uniform(-1.0, 1.0);
  return Tensor::from_data({n}, std::move(d));
}

// The +-0.08 init attenuates 3-step gradients below the finite-difference
// noise floor; the check probes at a healthier weight scale.
void refill(Tensor& t, Rng& rng) {
  for (int i = 0; i < t.numel(); ++i) t.data()[i] = rng.uniform(-0.5, 0.5);
}

EncodedSample probe_sample(const CrurConfig& cfg, Rng& rng) {
  EncodedSample s;
  s.v = random_vec(cfg.v_dim, rng);
  s.w = random_vec(cfg.w_dim, rng);
  s.refs = {{4, 5, 4}};
  s.pos = {{kTagNoun, kTagVerb, kTagNoun}};
  return s;
}

std::vector<Tensor> param_list(CrurParams& p) {
  std::vector<Tensor> out;
  p.for_each_param([&](const std::string&, Tensor& t) { out.push_back(t); });
  return out;
}

CrurParams probe_params(const CrurConfig& cfg, Rng& rng) {
  CrurParams p = CrurParams::init(cfg, rng);
  p.for_each_param([&](const std::string&, Tensor& t) { refill(t, rng); });
  return p;
}

int cmd_grad_check(const GradCheckArgs& a) {
  if (a.trials < 0) throw ParameterError("trials must be non-negative");
  uint64_t seed = 1;
  if (!a.config.empty()) seed = load_config_file(a.config).train.seed;
  if (const auto env = env_seed_override()) seed = *env;
  if (a.trials == 0) {
    std::cout << "no trials requested; vacuously passing\n";
    return 0;
  }

  const Rng base(seed);
  const double tol = 1e-4;
  std::vector<std::string> failed;
  int group_idx = 0;

  auto run_group = [&](const std::string& name,
                       const std::function<double(Rng&)>& one_trial) {
    double worst = 0.0;
    for (int t = 0; t < a.trials; ++t) {
      Rng rng = base.fork(0x40000 + group_idx, t);
      worst = std::max(worst, one_trial(rng));
    }
    const bool ok = worst < tol;
    std::cout << std::left << std::setw(18) << name << " max rel err "
              << sci2(worst) << (ok ? "  ok" : "  FAIL") << "\n";
    if (!ok) failed.push_back(name);
    ++group_idx;
  };

  // Three-step teacher-forced rollouts cover each coupled cell variant end
  // to end (feedback path, composition, both heads).
  const struct {
    const char* name;
    CellKind kind;
    Coupling coupling;
    FeedbackKind fb;
  } variants[] = {
      {"rnn-open", CellKind::kRnn, Coupling::kOpen, FeedbackKind::kShared},
      {"rnn-closed", CellKind::kRnn, Coupling::kClosed, FeedbackKind::kMlp},
      {"lstm-open", CellKind::kLstm, Coupling::kOpen, FeedbackKind::kMemory},
      {"lstm-closed", CellKind::kLstm, Coupling::kClosed,
       FeedbackKind::kShared},
      {"gru-open", CellKind::kGru, Coupling::kOpen, FeedbackKind::kMlp},
      {"gru-closed", CellKind::kGru, Coupling::kClosed,
       FeedbackKind::kMemory},
  };
  for (const auto& var : variants) {
    run_group(var.name, [&](Rng& rng) {
      const CrurConfig cfg = probe_config(var.kind, var.coupling, var.fb);
      CrurParams params = probe_params(cfg, rng);
      const EncodedSample sample = probe_sample(cfg, rng);
      TrainConfig tc;
      tc.jitter_prob = 0.0;
      tc.pos_loss_weight = 0.5;
      auto loss = [&]() {
        Rng unused(0);
        return teacher_forced_pair(params, sample, 0, tc, unused, false).loss;
      };
      return grad_check(param_list(params), loss, 1e-4).max_rel_err;
    });
  }

  run_group("compose_output", [&](Rng& rng) {
    const CrurConfig cfg =
        probe_config(CellKind::kLstm, Coupling::kClosed, FeedbackKind::kShared);
    CrurParams params = probe_params(cfg, rng);
    const Tensor v = random_vec(cfg.v_dim, rng);
    const Tensor w = random_vec(cfg.w_dim, rng);
    auto loss = [&]() {
      CrurState st = init_state(v, w, params);
      st = step(st, Tensor(), Tensor(), params);
      const StepOutput so = compose_output(st, params, {});
      return ops::scale(ops::pick(ops::softmax_log(so.logits), 4), -1.0);
    };
    return grad_check(param_list(params), loss, 1e-4).max_rel_err;
  });

  run_group("pos_head", [&](Rng& rng) {
    const CrurConfig cfg =
        probe_config(CellKind::kGru, Coupling::kClosed, FeedbackKind::kShared);
    CrurParams params = probe_params(cfg, rng);
    const Tensor v = random_vec(cfg.v_dim, rng);
    const Tensor w = random_vec(cfg.w_dim, rng);
    auto loss = [&]() {
      CrurState st = init_state(v, w, params);
      st = step(st, Tensor(), Tensor(), params);
      const StepOutput so = compose_output(st, params, {});
      const Tensor logits = pos_head(so.u, params);
      return ops::scale(ops::pick(ops::softmax_log(logits), kTagVerb), -1.0);
    };
    return grad_check(param_list(params), loss, 1e-4).max_rel_err;
  });

  run_group("attn_decode", [&](Rng& rng) {
    const CrurConfig cfg =
        probe_config(CellKind::kLstm, Coupling::kClosed, FeedbackKind::kShared);
    CrurParams params = probe_params(cfg, rng);
    DecoderParams dec = DecoderParams::init(cfg, rng);
    dec.for_each_param([&](const std::string&, Tensor& t) { refill(t, rng); });
    const Tensor v = random_vec(cfg.v_dim, rng);
    const Tensor w = random_vec(cfg.w_dim, rng);
    std::vector<Tensor> plist = param_list(params);
    dec.for_each_param(
        [&](const std::string&, Tensor& t) { plist.push_back(t); });
    auto loss = [&]() {
      return attn_forced_loss(params, dec, v, w, {4, 5, 4},
                              AttnInit::kFromF);
    };
    return grad_check(plist, loss, 1e-3).max_rel_err;
  });

  run_group("bilstm_classify", [&](Rng& rng) {
    BiLstmParams bp = BiLstmParams::init(6, 2, 3, 4, rng);
    bp.for_each_param([&](const std::string&, Tensor& t) { refill(t, rng); });
    std::vector<Tensor> plist;
    bp.for_each_param(
        [&](const std::string&, Tensor& t) { plist.push_back(t); });
    auto loss = [&]() {
      const Tensor logits = bilstm_classify({4, 5, 1, 2}, bp);
      return ops::scale(ops::pick(ops::softmax_log(logits), 1), -1.0);
    };
    return grad_check(plist, loss, 1e-4).max_rel_err;
  });

  if (a.self_test_corrupt) {
    // Deliberate defect: the loss reads a parameter entry outside the taped
    // graph, so reverse mode misses that dependency and the harness must
    // flag it.  Exists only to prove the check can fail.
    run_group("self-test-corrupt", [&](Rng& rng) {
      const CrurConfig cfg = probe_config(CellKind::kRnn, Coupling::kOpen,
                                          FeedbackKind::kShared);
      CrurParams params = probe_params(cfg, rng);
      const Tensor v = random_vec(cfg.v_dim, rng);
      const Tensor w = random_vec(cfg.w_dim, rng);
      auto loss = [&]() {
        CrurState st = init_state(v, w, params);
        st = step(st, Tensor(), Tensor(), params);
        const StepOutput so = compose_output(st, params, {});
        Tensor nll = ops::scale(ops::pick(ops::softmax_log(so.logits), 4), -1.0);
        return ops::add(nll, Tensor::scalar(params.head_u.data()[0]));
      };
      return grad_check(param_list(params), loss, 1e-4).max_rel_err;
    });
  }

  if (!failed.empty()) {
    std::cerr << "grad-check FAILED:";
    for (const std::string& name : failed) std::cerr << " " << name;
    std::cerr << "\n";
    return 3;
  }
  std::cout << "grad-check passed: all groups within " << sci2(tol) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coupled-recurrent captioner: data, training, decoding and "
               "verification tools"};
  app.require_subcommand(1);

  GenDataArgs gd;
  CLI::App* gen = app.add_subcommand("gen-data", "Generate a synthetic corpus");
  gen->add_option("--out", gd.out, "Output directory")->required();
  gen->add_option("--n", gd.n, "Number of scenes");
  gen->add_option("--seed", gd.seed, "Generation seed");
  gen->add_option("--config", gd.config, "Config JSON for feature dims");

  TrainArgs tr;
  CLI::App* train = app.add_subcommand("train", "Train a model");
  train->add_option("--config", tr.config, "Config JSON (fresh run)");
  train->add_option("--data", tr.data, "Corpus directory")->required();
  train->add_option("--out", tr.out, "Checkpoint path")->required();
  train->add_option("--resume", tr.resume, "Checkpoint to continue from");
  train->add_option("--log", tr.log, "Log path (default: <out>.log)");

  EvalArgs ev;
  CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval_cmd->add_option("--ckpt", ev.ckpt, "Checkpoint path")->required();
  eval_cmd->add_option("--data", ev.data, "Corpus JSONL file")->required();
  eval_cmd->add_option("--beam", ev.beam, "Beam width (1 = greedy)");
  eval_cmd->add_option("--max-len", ev.max_len,
                       "Sequence budget (default: from checkpoint)");
  eval_cmd->add_option("--decoder", ev.decoder,
                       "head or attn (default: from checkpoint)");
  eval_cmd->add_flag("--length-normalize", ev.length_normalize,
                     "Rank beam hypotheses by per-token score");
  eval_cmd->add_flag("--pass-through", ev.pass_through,
                     "Score first references against the reference sets");

  CaptionArgs cap;
  CLI::App* caption = app.add_subcommand("caption", "Caption one sample");
  caption->add_option("--ckpt", cap.ckpt, "Checkpoint path")->required();
  caption->add_option("--data", cap.data, "Corpus JSONL file")->required();
  caption->add_option("--sample-id", cap.sample_id, "Scene id")->required();
  caption->add_option("--beam", cap.beam, "Beam width (1 = greedy)");
  caption->add_option("--max-len", cap.max_len,
                      "Sequence budget (default: from checkpoint)");
  caption->add_option("--decoder", cap.decoder,
                      "head or attn (default: from checkpoint)");
  caption->add_flag("--length-normalize", cap.length_normalize,
                    "Rank beam hypotheses by per-token score");

  TprDemoArgs tp;
  CLI::App* tpr = app.add_subcommand(
      "tpr-demo", "Bind/unbind/retrieve over random sequences");
  tpr->add_option("--k", tp.k, "Role order (2^k roles, k <= 10)");
  tpr->add_option("--vocab", tp.vocab, "Filler vocabulary size");
  tpr->add_option("--dim", tp.dim, "Filler dimension");
  tpr->add_option("--trials", tp.trials, "Random sequences to test");
  tpr->add_option("--seed", tp.seed, "Draw seed");

  GradCheckArgs gc;
  CLI::App* grad = app.add_subcommand(
      "grad-check", "Finite-difference check of every gradient path");
  grad->add_option("--config", gc.config, "Config JSON (seed source)");
  grad->add_option("--trials", gc.trials, "Random trials per group");
  grad
      ->add_flag("--self-test-corrupt", gc.self_test_corrupt,
                 "Add a deliberately broken group (must fail)")
      ->group("");  // hidden: test fixture

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(gd);
    if (train->parsed()) return cmd_train(tr);
    if (eval_cmd->parsed()) return cmd_eval(ev);
    if (caption->parsed()) return cmd_caption(cap);
    if (tpr->parsed()) return cmd_tpr_demo(tp);
    if (grad->parsed()) return cmd_grad_check(gc);
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const ParameterError& e) {
    std::cerr << "parameter error: " << e.what() << "\n";
    return 1;
  } catch (const CheckpointError& e) {
    std::cerr << "checkpoint error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return 2;
  } catch (const crur::ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return 2;
  } catch (const SchemaError& e) {
    std::cerr << "schema error: " << e.what() << "\n";
    return 2;
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 2;
  } catch (const GenerationError& e) {
    std::cerr << "generation error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
