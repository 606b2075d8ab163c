#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "crur/checkpoint.h"
#include "crur/corpus.h"
#include "crur/error.h"
#include "crur/rng.h"
#include "crur/tokens.h"
#include "doctest.h"
#include "json.hpp"

using namespace crur;

namespace {

std::string tmp_path(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "crur_ckpt_tests";
  std::filesystem::create_directories(dir);
  return (dir / name).string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// A small but fully wired checkpoint: closed lstm with memory feedback so
// every optional tensor family is allocated.
Checkpoint make_checkpoint() {
  Checkpoint ck;
  ck.configs.model.s_rows = 3;
  ck.configs.model.s_cols = 2;
  ck.configs.model.p_dim = 2;
  ck.configs.model.embed_dim = 2;
  ck.configs.model.v_dim = 4;
  ck.configs.model.w_dim = 3;
  ck.configs.model.vocab_size = 7;
  ck.configs.model.feedback = FeedbackKind::kMemory;
  ck.configs.train.epochs = 3;
  ck.configs.train.seed = 99;
  ck.seed = 99;
  ck.epoch = 2;
  ck.vocab.id_to_word = {"<PAD>", "<START>", "<END>", "<UNK>",
                         "ball",  "cat",     "sees"};
  for (int i = kReservedTokens; i < ck.vocab.size(); ++i)
    ck.vocab.word_to_id[ck.vocab.id_to_word[i]] = i;
  Rng rng(123);
  ck.params = CrurParams::init(ck.configs.model, rng);
  return ck;
}

}  // namespace

TEST_SUITE("checkpoint") {

TEST_CASE("base64 encodes the reference vectors") {
  auto enc = [](const std::string& s) {
    return base64_encode(std::vector<unsigned char>(s.begin(), s.end()));
  };
  CHECK(enc("") == "");
  CHECK(enc("f") == "Zg==");
  CHECK(enc("fo") == "Zm8=");
  CHECK(enc("foo") == "Zm9v");
  CHECK(enc("foob") == "Zm9vYg==");
  CHECK(enc("fooba") == "Zm9vYmE=");
  CHECK(enc("foobar") == "Zm9vYmFy");
}

TEST_CASE("base64 decode inverts encode and rejects junk") {
  Rng rng(7);
  for (int n = 0; n <= 32; ++n) {
    std::vector<unsigned char> bytes;
    for (int i = 0; i < n; ++i)
      bytes.push_back(static_cast<unsigned char>(rng.uniform_int(256)));
    CHECK(base64_decode(base64_encode(bytes)) == bytes);
  }
  CHECK_THROWS_AS(base64_decode("Zg="), ParseError);     // bad length
  CHECK_THROWS_AS(base64_decode("Z?=="), ParseError);    // bad character
  CHECK_THROWS_AS(base64_decode("=g=="), ParseError);    // early padding
  CHECK_THROWS_AS(base64_decode("Zg==Zg=="), ParseError);  // data after pad
}

TEST_CASE("float64 packing is little-endian and bit-exact") {
  // 1.0 = 0x3FF0000000000000; LSB-first bytes end with f0 3f.
  CHECK(encode_f64({1.0}) == base64_encode({0, 0, 0, 0, 0, 0, 0xf0, 0x3f}));
  // -2.0 = 0xC000000000000000.
  CHECK(encode_f64({-2.0}) == base64_encode({0, 0, 0, 0, 0, 0, 0, 0xc0}));

  // Bitwise round trip including negative zero, denormal, inf and nan.
  std::vector<double> values = {0.0, -0.0, 5e-324, 1.0 / 3.0,
                                std::numeric_limits<double>::infinity(),
                                std::numeric_limits<double>::quiet_NaN()};
  Rng rng(11);
  for (int i = 0; i < 50; ++i) values.push_back(rng.gaussian() * 1e3);
  const std::vector<double> back = decode_f64(encode_f64(values));
  REQUIRE(back.size() == values.size());
  for (size_t i = 0; i < values.size(); ++i) {
    uint64_t a = 0, b = 0;
    std::memcpy(&a, &values[i], 8);
    std::memcpy(&b, &back[i], 8);
    CHECK(a == b);
  }
  CHECK_THROWS_AS(decode_f64("Zm9v"), ParseError);  // 3 bytes, not 8k
}

TEST_CASE("save, load, save is byte-identical") {
  const Checkpoint ck = make_checkpoint();
  const std::string p1 = tmp_path("roundtrip_a.json");
  const std::string p2 = tmp_path("roundtrip_b.json");
  save_checkpoint(ck, p1);
  const Checkpoint back = load_checkpoint(p1);
  save_checkpoint(back, p2);
  CHECK(slurp(p1) == slurp(p2));
  CHECK(slurp(p1) == checkpoint_to_text(ck));
}

TEST_CASE("round trip preserves every field bitwise") {
  Checkpoint ck = make_checkpoint();
  // Poison a couple of entries with values that stress serialization.
  ck.params.embed.data()[0] = -0.0;
  ck.params.embed.data()[1] = 5e-324;
  ck.params.head_u.data()[0] = 1.0 / 3.0;
  const Checkpoint back = parse_checkpoint_text(checkpoint_to_text(ck));

  CHECK(back.format_version == kCheckpointFormatVersion);
  CHECK(back.seed == ck.seed);
  CHECK(back.epoch == ck.epoch);
  CHECK(back.vocab.id_to_word == ck.vocab.id_to_word);
  CHECK(back.vocab.word_to_id == ck.vocab.word_to_id);
  CHECK(config_bundle_to_text(back.configs) ==
        config_bundle_to_text(ck.configs));

  int tensors = 0;
  std::vector<std::string> names;
  ck.params.for_each_param([&](const std::string& name, const Tensor& t) {
    names.push_back(name);
    ++tensors;
    (void)t;
  });
  int i = 0;
  back.params.for_each_param([&](const std::string& name, const Tensor& t) {
    REQUIRE(i < tensors);
    CHECK(name == names[i]);
    ++i;
    const Tensor* orig = nullptr;
    ck.params.for_each_param([&](const std::string& n2, const Tensor& t2) {
      if (n2 == name) orig = &t2;
    });
    REQUIRE(orig != nullptr);
    REQUIRE(t.shape() == orig->shape());
    CHECK(std::memcmp(t.data(), orig->data(),
                      sizeof(double) * t.numel()) == 0);
    CHECK(t.requires_grad());
  });
  CHECK(i == tensors);
}

TEST_CASE("format_version mismatch is rejected") {
  auto doc = nlohmann::ordered_json::parse(checkpoint_to_text(make_checkpoint()));
  doc["format_version"] = 2;
  CHECK_THROWS_AS(parse_checkpoint_text(doc.dump()), CheckpointError);
  CHECK_THROWS_WITH_AS(parse_checkpoint_text(doc.dump()),
                       doctest::Contains("format_version"), CheckpointError);
}

TEST_CASE("structural corruption is rejected with context") {
  const std::string good = checkpoint_to_text(make_checkpoint());
  using J = nlohmann::ordered_json;

  CHECK_THROWS_AS(parse_checkpoint_text("not json at all"), CheckpointError);
  CHECK_THROWS_AS(parse_checkpoint_text("[1,2,3]"), CheckpointError);

  {  // missing top-level field
    J doc = J::parse(good);
    doc.erase("vocab");
    CHECK_THROWS_WITH_AS(parse_checkpoint_text(doc.dump()),
                         doctest::Contains("vocab"), CheckpointError);
  }
  {  // extra top-level field
    J doc = J::parse(good);
    doc["extra"] = 1;
    CHECK_THROWS_AS(parse_checkpoint_text(doc.dump()), CheckpointError);
  }
  {  // config schema violation surfaces as a checkpoint error
    J doc = J::parse(good);
    doc["config"]["model"]["cell_kind"] = "perceptron";
    CHECK_THROWS_WITH_AS(parse_checkpoint_text(doc.dump()),
                         doctest::Contains("config"), CheckpointError);
  }
  {  // vocab length must match the resolved model geometry
    J doc = J::parse(good);
    doc["vocab"].push_back("stowaway");
    CHECK_THROWS_WITH_AS(parse_checkpoint_text(doc.dump()),
                         doctest::Contains("vocab_size"), CheckpointError);
  }
  {  // reserved prefix is fixed
    J doc = J::parse(good);
    doc["vocab"][0] = "<pad>";
    CHECK_THROWS_AS(parse_checkpoint_text(doc.dump()), CheckpointError);
  }
  {  // duplicate content word
    J doc = J::parse(good);
    doc["vocab"][5] = doc["vocab"][4];
    CHECK_THROWS_AS(parse_checkpoint_text(doc.dump()), CheckpointError);
  }
}

TEST_CASE("parameter table corruption is rejected by name") {
  const std::string good = checkpoint_to_text(make_checkpoint());
  using J = nlohmann::ordered_json;

  {  // missing tensor
    J doc = J::parse(good);
    doc["params"].erase("embed");
    CHECK_THROWS_WITH_AS(parse_checkpoint_text(doc.dump()),
                         doctest::Contains("embed"), CheckpointError);
  }
  {  // unknown tensor
    J doc = J::parse(good);
    doc["params"]["bogus"] = doc["params"]["embed"];
    CHECK_THROWS_WITH_AS(parse_checkpoint_text(doc.dump()),
                         doctest::Contains("bogus"), CheckpointError);
  }
  {  // shape mismatch
    J doc = J::parse(good);
    doc["params"]["head_u"]["shape"] = {1, 1};
    CHECK_THROWS_WITH_AS(parse_checkpoint_text(doc.dump()),
                         doctest::Contains("head_u"), CheckpointError);
  }
  {  // payload length disagrees with the shape
    J doc = J::parse(good);
    doc["params"]["head_u"]["data"] = encode_f64({1.0, 2.0});
    CHECK_THROWS_AS(parse_checkpoint_text(doc.dump()), CheckpointError);
  }
  {  // broken base64
    J doc = J::parse(good);
    doc["params"]["head_u"]["data"] = "????";
    CHECK_THROWS_WITH_AS(parse_checkpoint_text(doc.dump()),
                         doctest::Contains("head_u"), CheckpointError);
  }
}

TEST_CASE("geometry decides which tensors exist") {
  // An open rnn with shared feedback allocates no cross weights, no mlp
  // matrices and no memory gates; its checkpoint must restore cleanly and
  // reject a memory-feedback tensor smuggled in.
  Checkpoint ck = make_checkpoint();
  ck.configs.model.cell_kind = CellKind::kRnn;
  ck.configs.model.coupling = Coupling::kOpen;
  ck.configs.model.feedback = FeedbackKind::kShared;
  Rng rng(5);
  ck.params = CrurParams::init(ck.configs.model, rng);

  const std::string text = checkpoint_to_text(ck);
  const Checkpoint back = parse_checkpoint_text(text);
  CHECK(checkpoint_to_text(back) == text);

  using J = nlohmann::ordered_json;
  J doc = J::parse(text);
  J fake;
  fake["shape"] = {2, 2};
  fake["data"] = encode_f64({0.0, 0.0, 0.0, 0.0});
  doc["params"]["fb.mlp1"] = fake;
  CHECK_THROWS_WITH_AS(parse_checkpoint_text(doc.dump()),
                       doctest::Contains("fb.mlp1"), CheckpointError);
}

TEST_CASE("missing file raises IoError") {
  CHECK_THROWS_AS(load_checkpoint(tmp_path("no_such_checkpoint.json")),
                  IoError);
}

}  // TEST_SUITE
