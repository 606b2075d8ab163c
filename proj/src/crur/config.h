#ifndef CRUR_CONFIG_H_
#define CRUR_CONFIG_H_

#include <cstdint>
#include <string>

namespace crur {

enum class CellKind { kRnn, kLstm, kGru };
enum class Coupling { kOpen, kClosed };
enum class FeedbackKind { kShared, kMlp, kMemory };
enum class DecoderKind { kHead, kAttn };
enum class AttnInit { kConstant, kFromF };
enum class RewardMetric { kBleu4, kCiderdLite };

// Model geometry and wiring.  The coupled hidden pair is S (s_rows x s_cols,
// stored flat) and p (p_dim); the structural key u has dimension s_cols so
// that matricize(S)*u is well-formed.
struct CrurConfig {
  CellKind cell_kind = CellKind::kLstm;
  Coupling coupling = Coupling::kClosed;
  int s_rows = 100;
  int s_cols = 16;
  int p_dim = 16;
  int embed_dim = 16;
  int vocab_size = 0;  // 0 = derive from the training corpus
  int v_dim = 64;
  int w_dim = 32;
  int pos_classes = 6;
  FeedbackKind feedback = FeedbackKind::kShared;
  double dropout_rate = 0.5;
  int decoder_dim = 16;  // recurrent decoder width (attn decoding)
  AttnInit attn_init = AttnInit::kConstant;

  int s_dim() const { return s_rows * s_cols; }
  // Throws ConfigError; vocab_size must be resolved (> 0) by then.
  void validate() const;
};

struct TrainConfig {
  int epochs = 50;
  int batch_size = 8;
  double learning_rate = 0.1;
  double jitter_prob = 0.05;
  bool scst_enabled = false;
  int scst_steps = 0;  // SCST gradient steps after the cross-entropy phase
  RewardMetric reward_metric = RewardMetric::kBleu4;
  double grad_clip = 5.0;
  uint64_t seed = 1;
  double pos_loss_weight = 0.5;
  DecoderKind decoder = DecoderKind::kHead;
  int max_len = 20;  // full sequence budget including start/end markers

  void validate() const;
};

struct ConfigBundle {
  CrurConfig model;
  TrainConfig train;
};

// Strict JSON schema: top-level keys "model" and "train" (both optional,
// defaults apply), unknown keys anywhere are errors.
ConfigBundle parse_config_text(const std::string& text);
ConfigBundle load_config_file(const std::string& path);
// Canonical serialization (fixed key order) used for checkpoint embedding.
std::string config_bundle_to_text(const ConfigBundle& bundle);

const char* to_string(CellKind k);
const char* to_string(Coupling c);
const char* to_string(FeedbackKind f);
const char* to_string(DecoderKind d);
const char* to_string(AttnInit a);
const char* to_string(RewardMetric r);

}  // namespace crur

#endif  // CRUR_CONFIG_H_
