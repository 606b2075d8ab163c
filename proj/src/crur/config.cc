#include "crur/config.h"

#include <fstream>
#include <sstream>

#include "crur/error.h"
#include "json.hpp"

namespace crur {

namespace {

using json = nlohmann::ordered_json;

[[noreturn]] void bad(const std::string& msg) { throw ConfigError(msg); }

void reject_unknown_keys(const json& obj, const char* where,
                         std::initializer_list<const char*> known) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* k : known)
      if (it.key() == k) {
        ok = true;
        break;
      }
    if (!ok) bad(std::string("unknown key \"") + it.key() + "\" in " + where);
  }
}

template <typename T>
void read_field(const json& obj, const char* key, T& out) {
  auto it = obj.find(key);
  if (it == obj.end()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception&) {
    bad(std::string("key \"") + key + "\" has the wrong type");
  }
}

template <typename E>
void read_enum(const json& obj, const char* key, E& out,
               std::initializer_list<std::pair<const char*, E>> table) {
  auto it = obj.find(key);
  if (it == obj.end()) return;
  if (!it->is_string()) bad(std::string("key \"") + key + "\" must be a string");
  const std::string v = it->get<std::string>();
  for (const auto& [name, val] : table)
    if (v == name) {
      out = val;
      return;
    }
  bad(std::string("invalid value \"") + v + "\" for key \"" + key + "\"");
}

CrurConfig parse_model(const json& obj) {
  reject_unknown_keys(
      obj, "\"model\"",
      {"cell_kind", "coupling", "s_rows", "s_cols", "p_dim", "embed_dim",
       "vocab_size", "v_dim", "w_dim", "pos_classes", "feedback",
       "dropout_rate", "decoder_dim", "attn_init"});
  CrurConfig c;
  read_enum(obj, "cell_kind", c.cell_kind,
            {{"rnn", CellKind::kRnn},
             {"lstm", CellKind::kLstm},
             {"gru", CellKind::kGru}});
  read_enum(obj, "coupling", c.coupling,
            {{"open", Coupling::kOpen}, {"closed", Coupling::kClosed}});
  read_field(obj, "s_rows", c.s_rows);
  read_field(obj, "s_cols", c.s_cols);
  read_field(obj, "p_dim", c.p_dim);
  read_field(obj, "embed_dim", c.embed_dim);
  read_field(obj, "vocab_size", c.vocab_size);
  read_field(obj, "v_dim", c.v_dim);
  read_field(obj, "w_dim", c.w_dim);
  read_field(obj, "pos_classes", c.pos_classes);
  read_enum(obj, "feedback", c.feedback,
            {{"shared", FeedbackKind::kShared},
             {"mlp", FeedbackKind::kMlp},
             {"memory", FeedbackKind::kMemory}});
  read_field(obj, "dropout_rate", c.dropout_rate);
  read_field(obj, "decoder_dim", c.decoder_dim);
  read_enum(obj, "attn_init", c.attn_init,
            {{"constant", AttnInit::kConstant}, {"from_f", AttnInit::kFromF}});
  return c;
}

TrainConfig parse_train(const json& obj) {
  reject_unknown_keys(
      obj, "\"train\"",
      {"epochs", "batch_size", "learning_rate", "jitter_prob", "scst_enabled",
       "scst_steps", "reward_metric", "grad_clip", "seed", "pos_loss_weight",
       "decoder", "max_len"});
  TrainConfig t;
  read_field(obj, "epochs", t.epochs);
  read_field(obj, "batch_size", t.batch_size);
  read_field(obj, "learning_rate", t.learning_rate);
  read_field(obj, "jitter_prob", t.jitter_prob);
  read_field(obj, "scst_enabled", t.scst_enabled);
  read_field(obj, "scst_steps", t.scst_steps);
  read_enum(obj, "reward_metric", t.reward_metric,
            {{"bleu4", RewardMetric::kBleu4},
             {"ciderd_lite", RewardMetric::kCiderdLite}});
  read_field(obj, "grad_clip", t.grad_clip);
  read_field(obj, "seed", t.seed);
  read_field(obj, "pos_loss_weight", t.pos_loss_weight);
  read_enum(obj, "decoder", t.decoder,
            {{"head", DecoderKind::kHead}, {"attn", DecoderKind::kAttn}});
  read_field(obj, "max_len", t.max_len);
  return t;
}

void require_positive(int v, const char* name) {
  if (v <= 0) bad(std::string(name) + " must be positive, got " +
                  std::to_string(v));
}

}  // namespace

void CrurConfig::validate() const {
  require_positive(s_rows, "s_rows");
  require_positive(s_cols, "s_cols");
  require_positive(p_dim, "p_dim");
  require_positive(embed_dim, "embed_dim");
  require_positive(vocab_size, "vocab_size");
  require_positive(v_dim, "v_dim");
  require_positive(w_dim, "w_dim");
  require_positive(pos_classes, "pos_classes");
  require_positive(decoder_dim, "decoder_dim");
  if (dropout_rate < 0.0 || dropout_rate >= 1.0)
    bad("dropout_rate must lie in [0,1), got " + std::to_string(dropout_rate));
  if (vocab_size < 4)
    bad("vocab_size must cover the four reserved tokens, got " +
        std::to_string(vocab_size));
}

void TrainConfig::validate() const {
  if (epochs < 0) bad("epochs must be non-negative");
  require_positive(batch_size, "batch_size");
  if (learning_rate <= 0.0) bad("learning_rate must be positive");
  if (jitter_prob < 0.0 || jitter_prob > 0.2)
    bad("jitter_prob must lie in [0,0.2], got " + std::to_string(jitter_prob));
  if (scst_steps < 0) bad("scst_steps must be non-negative");
  if (grad_clip <= 0.0) bad("grad_clip must be positive");
  if (pos_loss_weight < 0.0) bad("pos_loss_weight must be non-negative");
  if (max_len < 2) bad("max_len must be at least 2 (start + end markers)");
}

ConfigBundle parse_config_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    bad(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) bad("config root must be a JSON object");
  reject_unknown_keys(doc, "config root", {"model", "train"});
  ConfigBundle b;
  if (doc.contains("model")) {
    if (!doc["model"].is_object()) bad("\"model\" must be an object");
    b.model = parse_model(doc["model"]);
    // Geometry errors surface immediately; only the vocabulary may stay
    // unresolved (0) until a corpus fixes it.
    CrurConfig probe = b.model;
    if (probe.vocab_size == 0) probe.vocab_size = 4;
    probe.validate();
  }
  if (doc.contains("train")) {
    if (!doc["train"].is_object()) bad("\"train\" must be an object");
    b.train = parse_train(doc["train"]);
  }
  b.train.validate();
  return b;
}

ConfigBundle load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

std::string config_bundle_to_text(const ConfigBundle& b) {
  json doc;
  json m;
  m["cell_kind"] = to_string(b.model.cell_kind);
  m["coupling"] = to_string(b.model.coupling);
  m["s_rows"] = b.model.s_rows;
  m["s_cols"] = b.model.s_cols;
  m["p_dim"] = b.model.p_dim;
  m["embed_dim"] = b.model.embed_dim;
  m["vocab_size"] = b.model.vocab_size;
  m["v_dim"] = b.model.v_dim;
  m["w_dim"] = b.model.w_dim;
  m["pos_classes"] = b.model.pos_classes;
  m["feedback"] = to_string(b.model.feedback);
  m["dropout_rate"] = b.model.dropout_rate;
  m["decoder_dim"] = b.model.decoder_dim;
  m["attn_init"] = to_string(b.model.attn_init);
  json t;
  t["epochs"] = b.train.epochs;
  t["batch_size"] = b.train.batch_size;
  t["learning_rate"] = b.train.learning_rate;
  t["jitter_prob"] = b.train.jitter_prob;
  t["scst_enabled"] = b.train.scst_enabled;
  t["scst_steps"] = b.train.scst_steps;
  t["reward_metric"] = to_string(b.train.reward_metric);
  t["grad_clip"] = b.train.grad_clip;
  t["seed"] = b.train.seed;
  t["pos_loss_weight"] = b.train.pos_loss_weight;
  t["decoder"] = to_string(b.train.decoder);
  t["max_len"] = b.train.max_len;
  doc["model"] = std::move(m);
  doc["train"] = std::move(t);
  return doc.dump(2);
}

const char* to_string(CellKind k) {
  switch (k) {
    case CellKind::kRnn: return "rnn";
    case CellKind::kLstm: return "lstm";
    case CellKind::kGru: return "gru";
  }
  return "?";
}
const char* to_string(Coupling c) {
  return c == Coupling::kOpen ? "open" : "closed";
}
const char* to_string(FeedbackKind f) {
  switch (f) {
    case FeedbackKind::kShared: return "shared";
    case FeedbackKind::kMlp: return "mlp";
    case FeedbackKind::kMemory: return "memory";
  }
  return "?";
}
const char* to_string(DecoderKind d) {
  return d == DecoderKind::kHead ? "head" : "attn";
}
const char* to_string(AttnInit a) {
  return a == AttnInit::kConstant ? "constant" : "from_f";
}
const char* to_string(RewardMetric r) {
  return r == RewardMetric::kBleu4 ? "bleu4" : "ciderd_lite";
}

}  // namespace crur
