#include "crur/checkpoint.h"

#include <array>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "crur/error.h"
#include "crur/tokens.h"
#include "json.hpp"

namespace crur {

namespace {

using json = nlohmann::ordered_json;

const char kB64Alphabet[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

[[noreturn]] void corrupt(const std::string& msg) {
  throw CheckpointError("checkpoint: " + msg);
}

}  // namespace

std::string base64_encode(const std::vector<unsigned char>& bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  size_t i = 0;
  for (; i + 3 <= bytes.size(); i += 3) {
    const unsigned v = (unsigned(bytes[i]) << 16) | (unsigned(bytes[i + 1]) << 8) |
                       unsigned(bytes[i + 2]);
    out += kB64Alphabet[(v >> 18) & 63];
    out += kB64Alphabet[(v >> 12) & 63];
    out += kB64Alphabet[(v >> 6) & 63];
    out += kB64Alphabet[v & 63];
  }
  const size_t rem = bytes.size() - i;
  if (rem == 1) {
    const unsigned v = unsigned(bytes[i]) << 16;
    out += kB64Alphabet[(v >> 18) & 63];
    out += kB64Alphabet[(v >> 12) & 63];
    out += "==";
  } else if (rem == 2) {
    const unsigned v = (unsigned(bytes[i]) << 16) | (unsigned(bytes[i + 1]) << 8);
    out += kB64Alphabet[(v >> 18) & 63];
    out += kB64Alphabet[(v >> 12) & 63];
    out += kB64Alphabet[(v >> 6) & 63];
    out += '=';
  }
  return out;
}

std::vector<unsigned char> base64_decode(const std::string& text) {
  if (text.size() % 4 != 0) throw ParseError("base64: length not a multiple of 4");
  static const auto value_of = [] {
    std::array<int, 256> t{};
    t.fill(-1);
    for (int i = 0; i < 64; ++i) t[static_cast<unsigned char>(kB64Alphabet[i])] = i;
    return t;
  }();
  std::vector<unsigned char> out;
  out.reserve(text.size() / 4 * 3);
  for (size_t i = 0; i < text.size(); i += 4) {
    int pad = 0;
    unsigned v = 0;
    for (int j = 0; j < 4; ++j) {
      const char c = text[i + j];
      if (c == '=') {
        // Padding may only occupy the last two symbols of the final quartet.
        if (i + 4 != text.size() || j < 2) throw ParseError("base64: stray padding");
        ++pad;
        v <<= 6;
        continue;
      }
      if (pad > 0) throw ParseError("base64: data after padding");
      const int d = value_of[static_cast<unsigned char>(c)];
      if (d < 0) throw ParseError("base64: invalid character");
      v = (v << 6) | unsigned(d);
    }
    out.push_back(static_cast<unsigned char>((v >> 16) & 255));
    if (pad < 2) out.push_back(static_cast<unsigned char>((v >> 8) & 255));
    if (pad < 1) out.push_back(static_cast<unsigned char>(v & 255));
  }
  return out;
}

std::string encode_f64(const std::vector<double>& values) {
  std::vector<unsigned char> bytes;
  bytes.reserve(values.size() * 8);
  for (double d : values) {
    uint64_t u = 0;
    std::memcpy(&u, &d, 8);
    for (int b = 0; b < 8; ++b)
      bytes.push_back(static_cast<unsigned char>((u >> (8 * b)) & 255));
  }
  return base64_encode(bytes);
}

std::vector<double> decode_f64(const std::string& text) {
  const std::vector<unsigned char> bytes = base64_decode(text);
  if (bytes.size() % 8 != 0)
    throw ParseError("float64 payload: byte count not a multiple of 8");
  std::vector<double> out(bytes.size() / 8);
  for (size_t i = 0; i < out.size(); ++i) {
    uint64_t u = 0;
    for (int b = 7; b >= 0; --b) u = (u << 8) | uint64_t(bytes[i * 8 + b]);
    double d = 0;
    std::memcpy(&d, &u, 8);
    out[i] = d;
  }
  return out;
}

std::string checkpoint_to_text(const Checkpoint& ck) {
  json doc;
  doc["format_version"] = ck.format_version;
  doc["config"] = json::parse(config_bundle_to_text(ck.configs));
  doc["seed"] = ck.seed;
  doc["epoch"] = ck.epoch;
  doc["vocab"] = ck.vocab.id_to_word;
  json params = json::object();
  ck.params.for_each_param([&](const std::string& name, const Tensor& t) {
    json entry;
    entry["shape"] = t.shape();
    entry["data"] =
        encode_f64(std::vector<double>(t.data(), t.data() + t.numel()));
    params[name] = std::move(entry);
  });
  doc["params"] = std::move(params);
  return doc.dump() + "\n";
}

Checkpoint parse_checkpoint_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    corrupt(std::string("not valid JSON: ") + e.what());
  }
  try {
    if (!doc.is_object()) corrupt("top level is not an object");
    for (const char* key :
         {"format_version", "config", "seed", "epoch", "vocab", "params"})
      if (!doc.contains(key)) corrupt(std::string("missing field '") + key + "'");
    if (doc.size() != 6) corrupt("unexpected extra top-level fields");

    Checkpoint ck;
    if (!doc["format_version"].is_number_integer())
      corrupt("format_version is not an integer");
    ck.format_version = doc["format_version"].get<int>();
    if (ck.format_version != kCheckpointFormatVersion)
      corrupt("format_version " + std::to_string(ck.format_version) +
              " unsupported (expected " +
              std::to_string(kCheckpointFormatVersion) + ")");

    try {
      ck.configs = parse_config_text(doc["config"].dump());
      ck.configs.model.validate();
      ck.configs.train.validate();
    } catch (const ConfigError& e) {
      corrupt(std::string("config: ") + e.what());
    }

    if (!doc["seed"].is_number_unsigned() && !doc["seed"].is_number_integer())
      corrupt("seed is not an integer");
    ck.seed = doc["seed"].get<uint64_t>();
    if (!doc["epoch"].is_number_integer()) corrupt("epoch is not an integer");
    ck.epoch = doc["epoch"].get<int>();
    if (ck.epoch < 0) corrupt("epoch is negative");

    if (!doc["vocab"].is_array()) corrupt("vocab is not an array");
    for (const auto& w : doc["vocab"])
      if (!w.is_string()) corrupt("vocab entries must be strings");
    ck.vocab.id_to_word = doc["vocab"].get<std::vector<std::string>>();
    const char* reserved[] = {"<PAD>", "<START>", "<END>", "<UNK>"};
    if (static_cast<int>(ck.vocab.id_to_word.size()) < kReservedTokens)
      corrupt("vocab shorter than the reserved prefix");
    for (int i = 0; i < kReservedTokens; ++i)
      if (ck.vocab.id_to_word[i] != reserved[i])
        corrupt("vocab id " + std::to_string(i) + " must be " +
                reserved[i]);
    for (int i = kReservedTokens; i < ck.vocab.size(); ++i)
      if (!ck.vocab.word_to_id.emplace(ck.vocab.id_to_word[i], i).second)
        corrupt("duplicate vocab word '" + ck.vocab.id_to_word[i] + "'");
    if (ck.vocab.size() != ck.configs.model.vocab_size)
      corrupt("vocab length " + std::to_string(ck.vocab.size()) +
              " != model.vocab_size " +
              std::to_string(ck.configs.model.vocab_size));

    // Allocate the parameter set for this geometry, then overwrite every
    // tensor from the document; the visitation order defines completeness.
    Rng scratch(0);
    ck.params = CrurParams::init(ck.configs.model, scratch);
    if (!doc["params"].is_object()) corrupt("params is not an object");
    const json& stored = doc["params"];
    std::set<std::string> seen;
    ck.params.for_each_param([&](const std::string& name, Tensor& t) {
      seen.insert(name);
      if (!stored.contains(name)) corrupt("missing tensor '" + name + "'");
      const json& entry = stored[name];
      if (!entry.is_object() || !entry.contains("shape") ||
          !entry.contains("data") || entry.size() != 2)
        corrupt("tensor '" + name + "' must hold exactly shape and data");
      std::vector<int> shape;
      try {
        shape = entry["shape"].get<std::vector<int>>();
      } catch (const json::exception&) {
        corrupt("tensor '" + name + "' has a malformed shape");
      }
      if (shape != t.shape()) corrupt("tensor '" + name + "' shape mismatch");
      if (!entry["data"].is_string())
        corrupt("tensor '" + name + "' data is not a string");
      std::vector<double> values;
      try {
        values = decode_f64(entry["data"].get<std::string>());
      } catch (const ParseError& e) {
        corrupt("tensor '" + name + "': " + e.what());
      }
      if (static_cast<int>(values.size()) != t.numel())
        corrupt("tensor '" + name + "' has " + std::to_string(values.size()) +
                " values, expected " + std::to_string(t.numel()));
      if (!values.empty())
        std::memcpy(t.data(), values.data(), values.size() * sizeof(double));
    });
    for (auto it = stored.begin(); it != stored.end(); ++it)
      if (!seen.count(it.key())) corrupt("unknown tensor '" + it.key() + "'");
    return ck;
  } catch (const json::exception& e) {
    corrupt(std::string("malformed document: ") + e.what());
  }
}

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  const std::string text = checkpoint_to_text(ck);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_checkpoint_text(ss.str());
}

}  // namespace crur
