#ifndef CRUR_CHECKPOINT_H_
#define CRUR_CHECKPOINT_H_

#include <cstdint>
#include <string>
#include <vector>

#include "crur/config.h"
#include "crur/corpus.h"
#include "crur/params.h"

namespace crur {

constexpr int kCheckpointFormatVersion = 1;

// Everything needed to resume or evaluate a run: resolved configs (model
// vocab_size > 0), the run's base seed, the count of completed training
// units (xent epochs, then epochs + SCST steps), the vocabulary, and all
// model parameters.  One self-describing JSON document; float64 tensors are
// base64 of their little-endian bytes.
struct Checkpoint {
  int format_version = kCheckpointFormatVersion;
  ConfigBundle configs;
  uint64_t seed = 1;
  int epoch = 0;
  Vocab vocab;
  CrurParams params;
};

// Canonical text form.  Serializing twice yields identical bytes, and
// parse -> serialize reproduces the input produced by this function.
std::string checkpoint_to_text(const Checkpoint& ck);

// Strict inverse.  Any defect -- malformed JSON, wrong format_version,
// config schema violation, vocab/params disagreement, bad base64, shape or
// name mismatch, missing or extra tensors -- throws CheckpointError.
Checkpoint parse_checkpoint_text(const std::string& text);

void save_checkpoint(const Checkpoint& ck, const std::string& path);  // IoError
Checkpoint load_checkpoint(const std::string& path);  // IoError / CheckpointError

// RFC 4648 base64, standard alphabet, '=' padding, no line breaks.
// decode is strict: only canonical padded input; else ParseError.
std::string base64_encode(const std::vector<unsigned char>& bytes);
std::vector<unsigned char> base64_decode(const std::string& text);

// float64 vector <-> base64 of explicit little-endian packing (LSB first,
// independent of host endianness).  decode_f64 throws ParseError when the
// decoded byte count is not a multiple of 8.
std::string encode_f64(const std::vector<double>& values);
std::vector<double> decode_f64(const std::string& text);

}  // namespace crur

#endif  // CRUR_CHECKPOINT_H_
