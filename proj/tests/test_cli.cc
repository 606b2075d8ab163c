// Subprocess tests for the command-line binary (path baked in by the build).

#include <sys/wait.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"

namespace {

namespace fs = std::filesystem;

struct RunResult {
  int exit_code = -1;
  std::string out;  // stdout only; stderr is discarded
};

RunResult run_cli(const std::string& args, const std::string& env = "") {
  std::string cmd;
  if (!env.empty()) cmd += env + " ";
  cmd += std::string(CRUR_CLI_PATH) + " " + args + " 2>/dev/null";
  RunResult r;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[4096];
  size_t n;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int status = pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string work_dir() {
  const auto dir = fs::temp_directory_path() / "crur_cli_tests";
  fs::create_directories(dir);
  return dir.string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  REQUIRE(out.good());
  out << text;
}

int line_count(const std::string& path) {
  const std::string text = slurp(path);
  int n = 0;
  for (char c : text) n += c == '\n';
  return n;
}

// Small geometry so one training epoch is quick.
const char* kTinyConfig = R"({
  "model": {"s_rows": 12, "s_cols": 6, "p_dim": 8, "embed_dim": 8,
            "v_dim": 64, "w_dim": 32},
  "train": {"epochs": 2, "batch_size": 4, "learning_rate": 0.3,
            "jitter_prob": 0.05, "seed": 11, "max_len": 18}
})";

std::string tiny_config_path() {
  const std::string path = work_dir() + "/tiny.json";
  spit(path, kTinyConfig);
  return path;
}

// Shared 20-scene corpus generated once per process.
std::string corpus_dir() {
  static const std::string dir = [] {
    const std::string d = work_dir() + "/data";
    const RunResult r =
        run_cli("gen-data --out " + d + " --n 20 --seed 7");
    REQUIRE(r.exit_code == 0);
    return d;
  }();
  return dir;
}

// One trained checkpoint reused by the decode-facing cases.
std::string trained_ckpt() {
  static const std::string path = [] {
    const std::string p = work_dir() + "/shared_ck.json";
    const RunResult r = run_cli("train --config " + tiny_config_path() +
                                " --data " + corpus_dir() + " --out " + p);
    REQUIRE(r.exit_code == 0);
    return p;
  }();
  return path;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("gen-data writes deterministic 8/1/1 splits") {
  const std::string d1 = work_dir() + "/gen_a";
  const std::string d2 = work_dir() + "/gen_b";
  for (const std::string& d : {d1, d2}) {
    const RunResult r =
        run_cli("gen-data --out " + d + " --n 10 --seed 21");
    CHECK(r.exit_code == 0);
  }
  CHECK(line_count(d1 + "/train.jsonl") == 8);
  CHECK(line_count(d1 + "/val.jsonl") == 1);
  CHECK(line_count(d1 + "/test.jsonl") == 1);
  for (const char* f : {"/train.jsonl", "/val.jsonl", "/test.jsonl"})
    CHECK(slurp(d1 + f) == slurp(d2 + f));

  // A different seed must actually change the corpus.
  const std::string d3 = work_dir() + "/gen_c";
  REQUIRE(run_cli("gen-data --out " + d3 + " --n 10 --seed 22").exit_code == 0);
  CHECK(slurp(d1 + "/train.jsonl") != slurp(d3 + "/train.jsonl"));
}

TEST_CASE("train writes checkpoint and log, and reruns byte-identically") {
  const std::string ck1 = work_dir() + "/train_a.json";
  const std::string ck2 = work_dir() + "/train_b.json";
  for (const std::string& ck : {ck1, ck2}) {
    std::error_code ec;
    fs::remove(ck + ".log", ec);
    const RunResult r = run_cli("train --config " + tiny_config_path() +
                                " --data " + corpus_dir() + " --out " + ck);
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("done:") != std::string::npos);
  }
  CHECK(slurp(ck1) == slurp(ck2));
  CHECK(slurp(ck1 + ".log") == slurp(ck2 + ".log"));
  // Log: one tab-separated line per epoch, five fields.
  std::istringstream log(slurp(ck1 + ".log"));
  std::string line;
  int lines = 0;
  while (std::getline(log, line)) {
    ++lines;
    CHECK(std::count(line.begin(), line.end(), '\t') == 4);
  }
  CHECK(lines == 2);
}

TEST_CASE("resume continues bit-identically to an uninterrupted run") {
  // Uninterrupted: 3 epochs.  Interrupted: 2 epochs, then resume under the
  // 3-epoch schedule.  Same model section, so the streams line up.
  const std::string cfg3 = work_dir() + "/cfg3.json";
  const std::string cfg2 = work_dir() + "/cfg2.json";
  std::string text = kTinyConfig;
  spit(cfg2, text);
  const auto pos = text.find("\"epochs\": 2");
  REQUIRE(pos != std::string::npos);
  text.replace(pos, 11, "\"epochs\": 3");
  spit(cfg3, text);

  const std::string ckA = work_dir() + "/resumeA.json";
  const std::string ckB = work_dir() + "/resumeB.json";
  const std::string logB = work_dir() + "/resumeB_combined.log";
  std::error_code ec;
  fs::remove(ckA + ".log", ec);
  fs::remove(logB, ec);

  REQUIRE(run_cli("train --config " + cfg3 + " --data " + corpus_dir() +
                  " --out " + ckA)
              .exit_code == 0);
  REQUIRE(run_cli("train --config " + cfg2 + " --data " + corpus_dir() +
                  " --out " + ckB + " --log " + logB)
              .exit_code == 0);
  REQUIRE(run_cli("train --config " + cfg3 + " --data " + corpus_dir() +
                  " --out " + ckB + " --resume " + ckB + " --log " + logB)
              .exit_code == 0);

  CHECK(slurp(ckA) == slurp(ckB));
  CHECK(slurp(ckA + ".log") == slurp(logB));

  // Resuming under a different geometry is refused as a config error.
  std::string other = kTinyConfig;
  const auto rows = other.find("\"s_rows\": 12");
  REQUIRE(rows != std::string::npos);
  other.replace(rows, 12, "\"s_rows\": 10");
  const std::string cfg_other = work_dir() + "/cfg_other.json";
  spit(cfg_other, other);
  CHECK(run_cli("train --config " + cfg_other + " --data " + corpus_dir() +
                " --out " + ckB + " --resume " + ckB)
            .exit_code == 1);
}

TEST_CASE("CRUR_SEED overrides the config seed") {
  const std::string ck_env = work_dir() + "/seed_env.json";
  const std::string ck_cfg = work_dir() + "/seed_cfg.json";
  const std::string ck_base = work_dir() + "/seed_base.json";

  REQUIRE(run_cli("train --config " + tiny_config_path() + " --data " +
                  corpus_dir() + " --out " + ck_env,
                  "CRUR_SEED=12")
              .exit_code == 0);
  std::string cfg12 = kTinyConfig;
  const auto pos = cfg12.find("\"seed\": 11");
  REQUIRE(pos != std::string::npos);
  cfg12.replace(pos, 10, "\"seed\": 12");
  const std::string cfg12_path = work_dir() + "/tiny12.json";
  spit(cfg12_path, cfg12);
  REQUIRE(run_cli("train --config " + cfg12_path + " --data " + corpus_dir() +
                  " --out " + ck_cfg)
              .exit_code == 0);
  REQUIRE(run_cli("train --config " + tiny_config_path() + " --data " +
                  corpus_dir() + " --out " + ck_base)
              .exit_code == 0);

  CHECK(slurp(ck_env) == slurp(ck_cfg));
  CHECK(slurp(ck_env) != slurp(ck_base));

  CHECK(run_cli("train --config " + tiny_config_path() + " --data " +
                corpus_dir() + " --out " + work_dir() + "/junk.json",
                "CRUR_SEED=banana")
            .exit_code == 1);
}

TEST_CASE("config and data defects map to exit codes 1 and 2") {
  const std::string bad_cfg = work_dir() + "/bad_cfg.json";
  spit(bad_cfg, R"({"model": {"cell_kind": "perceptron"}})");
  CHECK(run_cli("train --config " + bad_cfg + " --data " + corpus_dir() +
                " --out " + work_dir() + "/junk2.json")
            .exit_code == 1);

  const std::string unknown_key = work_dir() + "/unknown_key.json";
  spit(unknown_key, R"({"model": {"cell_knid": "lstm"}})");
  CHECK(run_cli("train --config " + unknown_key + " --data " + corpus_dir() +
                " --out " + work_dir() + "/junk3.json")
            .exit_code == 1);

  CHECK(run_cli("eval --ckpt " + trained_ckpt() + " --data " + work_dir() +
                "/missing.jsonl")
            .exit_code == 2);
  CHECK(run_cli("caption --ckpt " + trained_ckpt() + " --data " +
                corpus_dir() + "/val.jsonl --sample-id 424242")
            .exit_code == 2);
  CHECK(run_cli("eval").exit_code == 1);  // missing required flags

  // Tampered checkpoint: wrong format_version.
  const std::string tampered = work_dir() + "/tampered.json";
  std::string ck_text = slurp(trained_ckpt());
  const auto vpos = ck_text.find("\"format_version\":1");
  REQUIRE(vpos != std::string::npos);
  ck_text.replace(vpos, 18, "\"format_version\":9");
  spit(tampered, ck_text);
  CHECK(run_cli("eval --ckpt " + tampered + " --data " + corpus_dir() +
                "/val.jsonl")
            .exit_code == 2);
}

TEST_CASE("eval emits a full report and pass-through scores 1.0") {
  const RunResult r = run_cli("eval --ckpt " + trained_ckpt() + " --data " +
                              corpus_dir() + "/val.jsonl --beam 2");
  REQUIRE(r.exit_code == 0);
  const auto doc = nlohmann::json::parse(r.out);
  for (const char* key : {"bleu1", "bleu2", "bleu3", "bleu4", "ciderd_lite",
                          "pos_accuracy", "sample_count"})
    CHECK(doc.contains(key));
  CHECK(doc["sample_count"].get<int>() == 2);

  const RunResult pt = run_cli("eval --ckpt " + trained_ckpt() + " --data " +
                               corpus_dir() + "/val.jsonl --pass-through");
  REQUIRE(pt.exit_code == 0);
  const auto ptdoc = nlohmann::json::parse(pt.out);
  CHECK(ptdoc["bleu4"].get<double>() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(ptdoc["pos_accuracy"].get<double>() ==
        doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("beam 1 equals greedy and decoding is deterministic") {
  const std::string base = "eval --ckpt " + trained_ckpt() + " --data " +
                           corpus_dir() + "/val.jsonl";
  const RunResult def = run_cli(base);
  const RunResult b1 = run_cli(base + " --beam 1");
  REQUIRE(def.exit_code == 0);
  REQUIRE(b1.exit_code == 0);
  CHECK(def.out == b1.out);
  CHECK(run_cli(base).out == def.out);  // rerun: identical bytes

  const std::string cap = "caption --ckpt " + trained_ckpt() + " --data " +
                          corpus_dir() + "/val.jsonl --sample-id 16";
  const RunResult c1 = run_cli(cap + " --beam 1");
  const RunResult c2 = run_cli(cap);
  REQUIRE(c1.exit_code == 0);
  CHECK(c1.out == c2.out);
}

TEST_CASE("caption output is END-terminated and names the scene") {
  const RunResult r = run_cli("caption --ckpt " + trained_ckpt() +
                              " --data " + corpus_dir() +
                              "/val.jsonl --sample-id 16 --beam 3");
  REQUIRE(r.exit_code == 0);
  CHECK(r.out.find("scene 16:") != std::string::npos);
  CHECK(r.out.find("log-prob:") != std::string::npos);
  // The token line ends with the END marker.
  const auto tpos = r.out.find("tokens: ");
  REQUIRE(tpos != std::string::npos);
  std::string tok_line = r.out.substr(tpos);
  tok_line = tok_line.substr(0, tok_line.find('\n'));
  CHECK(tok_line.rfind("<END>") == tok_line.size() - 5);
  CHECK(tok_line.find("<START>") != std::string::npos);
}

TEST_CASE("attn decoding runs off the same checkpoint") {
  const RunResult r = run_cli("eval --ckpt " + trained_ckpt() + " --data " +
                              corpus_dir() + "/val.jsonl --decoder attn");
  REQUIRE(r.exit_code == 0);
  CHECK(nlohmann::json::parse(r.out).contains("bleu4"));
  const RunResult again = run_cli("eval --ckpt " + trained_ckpt() +
                                  " --data " + corpus_dir() +
                                  "/val.jsonl --decoder attn");
  CHECK(again.out == r.out);
  CHECK(run_cli("eval --ckpt " + trained_ckpt() + " --data " + corpus_dir() +
                "/val.jsonl --decoder telepathy")
            .exit_code == 1);
}

TEST_CASE("tpr-demo prints a 1.0000 retrieval rate") {
  const RunResult r = run_cli("tpr-demo --k 2 --vocab 40 --dim 12 --trials 50");
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("retrieval accuracy: 1.0000") != std::string::npos);
  CHECK(r.out.find("max unbind L-inf error") != std::string::npos);
  CHECK(r.out.find("spectrum max error") != std::string::npos);

  const RunResult k0 = run_cli("tpr-demo --k 0 --vocab 10 --dim 6 --trials 20");
  CHECK(k0.exit_code == 0);
  CHECK(k0.out.find("retrieval accuracy: 1.0000") != std::string::npos);

  CHECK(run_cli("tpr-demo --k 11").exit_code == 1);
}

TEST_CASE("grad-check passes clean and fails the corrupted fixture") {
  const RunResult ok = run_cli("grad-check --trials 1");
  CHECK(ok.exit_code == 0);
  CHECK(ok.out.find("grad-check passed") != std::string::npos);

  const RunResult bad = run_cli("grad-check --trials 1 --self-test-corrupt");
  CHECK(bad.exit_code == 3);
  CHECK(bad.out.find("self-test-corrupt") != std::string::npos);

  CHECK(run_cli("grad-check --trials 0").exit_code == 0);
}

}  // TEST_SUITE
