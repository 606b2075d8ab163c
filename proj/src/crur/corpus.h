#ifndef CRUR_CORPUS_H_
#define CRUR_CORPUS_H_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "crur/config.h"
#include "crur/hadamard.h"
#include "crur/tensor.h"

namespace crur {

// POS label ids in fixed order. END is not a lexicon tag: it labels the
// stop step when tag targets are built for training. "and" rides along as
// ADP since the label set has no conjunction slot.
constexpr int kTagDet = 0;
constexpr int kTagNoun = 1;
constexpr int kTagVerb = 2;
constexpr int kTagAdp = 3;
constexpr int kTagAdj = 4;
constexpr int kTagEnd = 5;
constexpr int kPosTagCount = 6;

const std::string& pos_tag_name(int tag);     // IndexError outside [0,6)
int pos_tag_id(const std::string& name);      // SchemaError on unknown names

struct SceneSample {
  int scene_id = 0;
  Tensor v;  // [v_dim] context feature
  Tensor w;  // [w_dim] tag/attribute feature, multi-hot in [0,1]
  std::vector<std::vector<std::string>> refs;  // body words, no START/END
  std::vector<std::vector<int>> pos;           // tag ids aligned with refs
};

struct Corpus {
  std::vector<SceneSample> train, val, test;
};

// Word -> tag map plus sentence templates. Template tokens are either
// literal lexicon words or one of the slots %S %V %O %A (scene tuple) and
// %P (the scene's adposition).
struct Grammar {
  std::map<std::string, int> lexicon;
  std::vector<std::vector<std::string>> templates;

  // The built-in desk grammar: 2 determiners, 6 adjectives, 14 nouns,
  // 6 verbs, 4 adpositions plus "and"; 6 templates spanning simple,
  // complex (prepositional) and compound shapes.
  static Grammar desk();

  // Content words (nouns, verbs, adjectives) in a fixed enumeration order;
  // their positions double as multi-hot slots for w.
  std::vector<std::string> content_words() const;

  // GenerationError if a template names an out-of-lexicon literal or an
  // unknown slot, or the lexicon breaks the tag/size limits.
  void validate() const;
};

// Draws n_samples scenes by seeded uniform choice over (subject, verb,
// object, attribute) tuples, expands 3-5 distinct templates each, and
// splits 8:1:1 disjoint by scene_id. v = sum of the tuple's word embeddings
// plus N(0, 0.05^2) noise; w = multi-hot of the tuple's content words.
// cfg supplies v_dim / w_dim. n_samples < 10 -> ParameterError.
Corpus generate_corpus(int n_samples, uint64_t seed, const CrurConfig& cfg);

// One JSON object per line:
// {"scene_id":int,"v":[...],"w":[...],"refs":[[word,...],...],
//  "pos":[[label,...],...]} with LF endings. Tags serialize as names.
void save_split(const std::vector<SceneSample>& samples,
                const std::string& path);

// Inverse of save_split. Missing file -> IoError; empty file -> InputError;
// malformed line N -> ParseError citing N; schema violations (missing
// fields, ref/pos mismatch, unknown POS label) -> SchemaError citing N.
std::vector<SceneSample> load_corpus(const std::string& path);

// Token index maps with the four reserved ids at 0..3. Content ids are
// assigned in lexicographic word order.
struct Vocab {
  std::vector<std::string> id_to_word;
  std::map<std::string, int> word_to_id;  // content words only

  int size() const { return static_cast<int>(id_to_word.size()); }
  int id_of(const std::string& word) const;  // kUnk when absent
  const std::string& word_of(int id) const;  // IndexError out of range
  std::vector<int> encode(const std::vector<std::string>& words) const;
};

struct VocabResult {
  Vocab vocab;
  EmbeddingTable table;  // [vocab, embed_dim]
};

// Words with corpus frequency >= 2 keep their own id; the rest fold into
// UNK. Embeddings are uniform(-0.08, 0.08) draws, then mean-centered so the
// global mean is 0 to 1e-12.
VocabResult build_vocab(const std::vector<SceneSample>& samples,
                        int embed_dim, uint64_t seed);

}  // namespace crur

#endif  // CRUR_CORPUS_H_
