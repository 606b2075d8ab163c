#include "crur/corpus.h"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "crur/error.h"
#include "crur/rng.h"
#include "crur/tokens.h"
#include "crur/train.h"
#include "json.hpp"

namespace crur {

namespace {

const std::vector<std::string> kTagNames = {"DET", "NOUN", "VERB",
                                            "ADP",  "ADJ", "END"};

std::string line_tag(const std::string& path, int line) {
  return path + ": line " + std::to_string(line) + ": ";
}

}  // namespace

const std::string& pos_tag_name(int tag) {
  if (tag < 0 || tag >= kPosTagCount)
    throw IndexError("POS tag id out of range: " + std::to_string(tag));
  return kTagNames[tag];
}

int pos_tag_id(const std::string& name) {
  for (int i = 0; i < kPosTagCount; ++i)
    if (kTagNames[i] == name) return i;
  throw SchemaError("unknown POS label '" + name + "'");
}

Grammar Grammar::desk() {
  Grammar g;
  auto add = [&](std::initializer_list<const char*> words, int tag) {
    for (const char* w : words) g.lexicon[w] = tag;
  };
  add({"the", "a"}, kTagDet);
  add({"red", "blue", "small", "big", "old", "new"}, kTagAdj);
  add({"cat", "dog", "bird", "fish", "ball", "book", "cup", "lamp", "desk",
       "chair", "box", "pen", "hat", "key"},
      kTagNoun);
  add({"sees", "holds", "chases", "finds", "watches", "touches"}, kTagVerb);
  // "and" joins compound clauses; it never fills the %P slot.
  add({"on", "near", "under", "beside", "and"}, kTagAdp);

  g.templates = {
      {"the", "%S", "%V", "the", "%O"},
      {"the", "%A", "%S", "%V", "the", "%O"},
      {"the", "%S", "%V", "a", "%A", "%O"},
      {"the", "%S", "%V", "%P", "the", "%A", "%O"},
      {"a", "%A", "%S", "%V", "%P", "the", "%O"},
      {"the", "%S", "%V", "the", "%O", "and", "a", "%A", "%S", "%V", "%P",
       "the", "%O"},
  };
  return g;
}

std::vector<std::string> Grammar::content_words() const {
  std::vector<std::string> out;
  for (const auto& [word, tag] : lexicon)
    if (tag == kTagNoun || tag == kTagVerb || tag == kTagAdj)
      out.push_back(word);
  return out;  // std::map iteration keeps this lexicographic
}

void Grammar::validate() const {
  if (lexicon.empty()) throw GenerationError("grammar has an empty lexicon");
  if (static_cast<int>(lexicon.size()) > 200)
    throw GenerationError("lexicon exceeds the 200-word budget");
  int nouns = 0, verbs = 0, adjs = 0, adps = 0;
  for (const auto& [word, tag] : lexicon) {
    if (tag < 0 || tag >= kTagEnd)
      throw GenerationError("lexicon word '" + word +
                            "' carries a non-lexical tag");
    if (tag == kTagNoun) ++nouns;
    if (tag == kTagVerb) ++verbs;
    if (tag == kTagAdj) ++adjs;
    if (tag == kTagAdp && word != "and") ++adps;
  }
  if (nouns < 2 || verbs < 1 || adjs < 1 || adps < 1)
    throw GenerationError("lexicon too small to fill a scene tuple");
  if (templates.size() < 5)
    throw GenerationError("need at least 5 templates for 3-5 distinct picks");
  for (const auto& tmpl : templates) {
    if (tmpl.empty()) throw GenerationError("empty template");
    for (const std::string& tok : tmpl) {
      if (!tok.empty() && tok[0] == '%') {
        if (tok != "%S" && tok != "%V" && tok != "%O" && tok != "%A" &&
            tok != "%P")
          throw GenerationError("unknown template slot '" + tok + "'");
      } else if (!lexicon.count(tok)) {
        throw GenerationError("template word not in lexicon: '" + tok + "'");
      }
    }
  }
}

Corpus generate_corpus(int n_samples, uint64_t seed, const CrurConfig& cfg) {
  if (n_samples < 10)
    throw ParameterError("corpus generation needs at least 10 samples");
  if (cfg.v_dim < 1 || cfg.w_dim < 1)
    throw ParameterError("v_dim and w_dim must be positive");
  Grammar g = Grammar::desk();
  g.validate();

  std::vector<std::string> nouns, verbs, adjs, adps;
  for (const auto& [word, tag] : g.lexicon) {
    if (tag == kTagNoun) nouns.push_back(word);
    if (tag == kTagVerb) verbs.push_back(word);
    if (tag == kTagAdj) adjs.push_back(word);
    if (tag == kTagAdp && word != "and") adps.push_back(word);
  }

  // Per-word context embeddings, unit-scale rows so tuple sums have
  // comparable norms at any v_dim.
  const std::vector<std::string> content = g.content_words();
  std::map<std::string, int> slot;
  for (size_t i = 0; i < content.size(); ++i)
    slot[content[i]] = static_cast<int>(i);
  Rng base(seed);
  Rng emb_rng = base.fork(1);
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(cfg.v_dim));
  std::map<std::string, Tensor> word_vec;
  for (const std::string& word : content) {
    Tensor e = Tensor::zeros({cfg.v_dim});
    for (int j = 0; j < cfg.v_dim; ++j)
      e.data()[j] = emb_rng.gaussian() * inv_scale;
    word_vec[word] = e;
  }

  std::vector<SceneSample> all;
  all.reserve(n_samples);
  const int n_templates = static_cast<int>(g.templates.size());
  for (int i = 0; i < n_samples; ++i) {
    Rng sr = base.fork(2, static_cast<uint64_t>(i));
    const std::string& subj = nouns[sr.uniform_int(static_cast<int>(nouns.size()))];
    const std::string& verb = verbs[sr.uniform_int(static_cast<int>(verbs.size()))];
    std::string obj = nouns[sr.uniform_int(static_cast<int>(nouns.size()))];
    while (obj == subj)
      obj = nouns[sr.uniform_int(static_cast<int>(nouns.size()))];
    const std::string& attr = adjs[sr.uniform_int(static_cast<int>(adjs.size()))];
    const std::string& adp = adps[sr.uniform_int(static_cast<int>(adps.size()))];

    // 3-5 distinct templates via a partial Fisher-Yates pass.
    const int n_refs = 3 + sr.uniform_int(3);
    std::vector<int> order(n_templates);
    for (int t = 0; t < n_templates; ++t) order[t] = t;
    for (int t = 0; t < n_refs; ++t)
      std::swap(order[t], order[t + sr.uniform_int(n_templates - t)]);

    SceneSample s;
    s.scene_id = i;
    for (int t = 0; t < n_refs; ++t) {
      std::vector<std::string> words;
      std::vector<int> tags;
      for (const std::string& tok : g.templates[order[t]]) {
        const std::string* w = &tok;
        if (tok == "%S") w = &subj;
        else if (tok == "%V") w = &verb;
        else if (tok == "%O") w = &obj;
        else if (tok == "%A") w = &attr;
        else if (tok == "%P") w = &adp;
        words.push_back(*w);
        tags.push_back(g.lexicon.at(*w));
      }
      s.refs.push_back(std::move(words));
      s.pos.push_back(std::move(tags));
    }

    s.v = Tensor::zeros({cfg.v_dim});
    for (const std::string& word : {subj, verb, obj, attr}) {
      const Tensor& e = word_vec.at(word);
      for (int j = 0; j < cfg.v_dim; ++j) s.v.data()[j] += e.at(j);
    }
    for (int j = 0; j < cfg.v_dim; ++j) s.v.data()[j] += sr.gaussian() * 0.05;

    s.w = Tensor::zeros({cfg.w_dim});
    for (const std::string& word : {subj, verb, obj, attr})
      s.w.data()[slot.at(word) % cfg.w_dim] = 1.0;

    all.push_back(std::move(s));
  }

  // 8:1:1 by scene id; the two small splits take n/10 scenes each.
  const int n_val = n_samples / 10, n_test = n_samples / 10;
  const int n_train = n_samples - n_val - n_test;
  Corpus c;
  c.train.assign(all.begin(), all.begin() + n_train);
  c.val.assign(all.begin() + n_train, all.begin() + n_train + n_val);
  c.test.assign(all.begin() + n_train + n_val, all.end());
  return c;
}

void save_split(const std::vector<SceneSample>& samples,
                const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for writing: " + path);
  for (const SceneSample& s : samples) {
    nlohmann::ordered_json j;
    j["scene_id"] = s.scene_id;
    std::vector<double> v(s.v.numel()), w(s.w.numel());
    for (int i = 0; i < s.v.numel(); ++i) v[i] = s.v.at(i);
    for (int i = 0; i < s.w.numel(); ++i) w[i] = s.w.at(i);
    j["v"] = v;
    j["w"] = w;
    j["refs"] = s.refs;
    std::vector<std::vector<std::string>> labels;
    for (const std::vector<int>& tags : s.pos) {
      std::vector<std::string> row;
      for (int t : tags) row.push_back(pos_tag_name(t));
      labels.push_back(std::move(row));
    }
    j["pos"] = labels;
    f << j.dump() << "\n";
  }
  if (!f) throw IoError("write failed: " + path);
}

std::vector<SceneSample> load_corpus(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open: " + path);
  std::vector<SceneSample> out;
  std::string line;
  int ln = 0;
  while (std::getline(f, line)) {
    ++ln;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) throw ParseError(line_tag(path, ln) + "empty line");
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const std::exception& e) {
      throw ParseError(line_tag(path, ln) + e.what());
    }
    try {
      for (const char* key : {"scene_id", "v", "w", "refs", "pos"})
        if (!j.contains(key))
          throw SchemaError("missing field '" + std::string(key) + "'");
      SceneSample s;
      s.scene_id = j.at("scene_id").get<int>();
      std::vector<double> v = j.at("v").get<std::vector<double>>();
      std::vector<double> w = j.at("w").get<std::vector<double>>();
      if (v.empty() || w.empty()) throw SchemaError("empty feature vector");
      s.v = Tensor::from_data({static_cast<int>(v.size())}, v);
      s.w = Tensor::from_data({static_cast<int>(w.size())}, w);
      s.refs = j.at("refs").get<std::vector<std::vector<std::string>>>();
      auto labels = j.at("pos").get<std::vector<std::vector<std::string>>>();
      if (labels.size() != s.refs.size())
        throw SchemaError("refs/pos count mismatch");
      for (size_t r = 0; r < labels.size(); ++r) {
        if (labels[r].size() != s.refs[r].size())
          throw SchemaError("refs/pos length mismatch in reference " +
                            std::to_string(r));
        std::vector<int> tags;
        for (const std::string& name : labels[r])
          tags.push_back(pos_tag_id(name));
        s.pos.push_back(std::move(tags));
      }
      out.push_back(std::move(s));
    } catch (const SchemaError& e) {
      throw SchemaError(line_tag(path, ln) + e.what());
    } catch (const nlohmann::json::exception& e) {
      throw SchemaError(line_tag(path, ln) + e.what());
    }
  }
  if (out.empty()) throw InputError("empty corpus file: " + path);
  return out;
}

int Vocab::id_of(const std::string& word) const {
  auto it = word_to_id.find(word);
  return it == word_to_id.end() ? kUnk : it->second;
}

const std::string& Vocab::word_of(int id) const {
  if (id < 0 || id >= size())
    throw IndexError("vocab id out of range: " + std::to_string(id));
  return id_to_word[id];
}

std::vector<int> Vocab::encode(const std::vector<std::string>& words) const {
  std::vector<int> out;
  out.reserve(words.size());
  for (const std::string& w : words) out.push_back(id_of(w));
  return out;
}

VocabResult build_vocab(const std::vector<SceneSample>& samples,
                        int embed_dim, uint64_t seed) {
  if (embed_dim < 1) throw ParameterError("embed_dim must be positive");
  std::map<std::string, int> freq;
  for (const SceneSample& s : samples)
    for (const auto& ref : s.refs)
      for (const std::string& w : ref) ++freq[w];

  VocabResult r;
  r.vocab.id_to_word = {"<PAD>", "<START>", "<END>", "<UNK>"};
  for (const auto& [word, count] : freq) {
    if (count < 2) continue;  // under-represented words fold into UNK
    r.vocab.word_to_id[word] = r.vocab.size();
    r.vocab.id_to_word.push_back(word);
  }

  Rng rng(seed);
  Tensor m = Tensor::zeros({r.vocab.size(), embed_dim});
  for (int i = 0; i < m.numel(); ++i) m.data()[i] = rng.uniform(-0.08, 0.08);
  r.table.matrix = normalize_embeddings(m);
  return r;
}

}  // namespace crur
