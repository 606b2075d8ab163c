#include "crur/metrics.h"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>

#include "crur/error.h"
#include "json.hpp"

namespace crur {

namespace {

using Counts = std::map<TokenSeq, int>;

Counts ngram_counts(const TokenSeq& s, int k) {
  Counts out;
  if (static_cast<int>(s.size()) >= k)
    for (size_t i = 0; i + k <= s.size(); ++i)
      ++out[TokenSeq(s.begin() + i, s.begin() + i + k)];
  return out;
}

void check_corpus(const std::vector<TokenSeq>& cands,
                  const std::vector<RefSet>& refs) {
  if (cands.empty()) throw InputError("no candidates to score");
  if (cands.size() != refs.size())
    throw InputError("candidate/reference count mismatch: " +
                     std::to_string(cands.size()) + " vs " +
                     std::to_string(refs.size()));
  for (const RefSet& rs : refs)
    if (rs.empty()) throw InputError("a sample has no references");
}

// Reference length closest to c, ties to the shorter reference.
int closest_ref_len(const RefSet& refs, int c) {
  int best = static_cast<int>(refs[0].size());
  for (const TokenSeq& r : refs) {
    int len = static_cast<int>(r.size());
    int d_new = std::abs(len - c), d_old = std::abs(best - c);
    if (d_new < d_old || (d_new == d_old && len < best)) best = len;
  }
  return best;
}

}  // namespace

double bleu_n(const std::vector<TokenSeq>& candidates,
              const std::vector<RefSet>& references, int n) {
  if (n < 1 || n > 4) throw ParameterError("order must lie in 1..4");
  check_corpus(candidates, references);

  long long c_total = 0, r_total = 0;
  double num[5] = {0, 0, 0, 0, 0}, den[5] = {0, 0, 0, 0, 0};
  for (size_t s = 0; s < candidates.size(); ++s) {
    const TokenSeq& cand = candidates[s];
    const int c_len = static_cast<int>(cand.size());
    c_total += c_len;
    r_total += closest_ref_len(references[s], c_len);

    for (int k = 1; k <= n; ++k) {
      int t = c_len - k + 1;
      if (t <= 0) continue;
      Counts cc = ngram_counts(cand, k);
      int m = 0;
      for (const auto& [gram, count] : cc) {
        int best_ref = 0;
        for (const TokenSeq& r : references[s]) {
          Counts rc = ngram_counts(r, k);
          auto it = rc.find(gram);
          if (it != rc.end()) best_ref = std::max(best_ref, it->second);
        }
        m += std::min(count, best_ref);
      }
      if (m == 0) {  // sentence-level add-one smoothing
        m = 1;
        t += 1;
      }
      num[k] += m;
      den[k] += t;
    }
  }

  if (c_total == 0) return 0.0;
  double log_sum = 0.0;
  int used = 0;
  for (int k = 1; k <= n; ++k) {
    if (den[k] <= 0.0) continue;  // no candidate was long enough
    log_sum += std::log(num[k] / den[k]);
    ++used;
  }
  if (used == 0) return 0.0;
  double score = std::exp(log_sum / used);
  if (c_total < r_total)
    score *= std::exp(1.0 - static_cast<double>(r_total) / c_total);
  return score;
}

double sentence_bleu4(const TokenSeq& candidate, const RefSet& references) {
  if (candidate.empty()) return 0.0;
  return bleu_n({candidate}, {references}, 4);
}

double ciderd_lite(const std::vector<TokenSeq>& candidates,
                   const std::vector<RefSet>& references) {
  check_corpus(candidates, references);
  const double n_sets = static_cast<double>(references.size());
  const double sigma = 6.0;

  // Document frequency of each k-gram over reference sets.
  std::map<TokenSeq, int> df[5];
  for (const RefSet& rs : references) {
    for (int k = 1; k <= 4; ++k) {
      Counts seen;
      for (const TokenSeq& r : rs)
        for (const auto& [gram, count] : ngram_counts(r, k)) seen[gram] = 1;
      for (const auto& [gram, one] : seen) df[k][gram] += one;
    }
  }
  auto idf = [&](const TokenSeq& gram, int k) {
    auto it = df[k].find(gram);
    double d = it == df[k].end() ? 0.0 : it->second;
    return 1.0 + std::log(n_sets) - std::log(std::max(1.0, d));
  };

  double corpus = 0.0;
  for (size_t s = 0; s < candidates.size(); ++s) {
    const TokenSeq& cand = candidates[s];
    double sent = 0.0;
    for (int k = 1; k <= 4; ++k) {
      Counts cc = ngram_counts(cand, k);
      double cn = 0.0;
      for (const auto& [gram, count] : cc) {
        double w = count * idf(gram, k);
        cn += w * w;
      }
      cn = std::sqrt(cn);

      double over_refs = 0.0;
      for (const TokenSeq& ref : references[s]) {
        Counts rc = ngram_counts(ref, k);
        double rn = 0.0, clipped = 0.0;
        for (const auto& [gram, count] : rc) {
          double w = count * idf(gram, k);
          rn += w * w;
        }
        rn = std::sqrt(rn);
        for (const auto& [gram, count] : cc) {
          auto it = rc.find(gram);
          if (it == rc.end()) continue;
          double iv = idf(gram, k);
          clipped += std::min(count, it->second) * iv * iv;
        }
        double sim = (cn > 0.0 && rn > 0.0) ? clipped / (cn * rn) : 0.0;
        double dl = static_cast<double>(cand.size()) -
                    static_cast<double>(ref.size());
        over_refs += sim * std::exp(-dl * dl / (2.0 * sigma * sigma));
      }
      sent += over_refs / static_cast<double>(references[s].size());
    }
    corpus += sent / 4.0;
  }
  return 10.0 * corpus / static_cast<double>(candidates.size());
}

double pos_accuracy(const std::vector<TokenSeq>& predicted,
                    const std::vector<TokenSeq>& gold) {
  if (predicted.size() != gold.size())
    throw InputError("tag sequence count mismatch");
  long long match = 0, total = 0;
  for (size_t s = 0; s < predicted.size(); ++s) {
    size_t len = std::min(predicted[s].size(), gold[s].size());
    total += static_cast<long long>(len);
    for (size_t i = 0; i < len; ++i)
      if (predicted[s][i] == gold[s][i]) ++match;
  }
  return total > 0 ? static_cast<double>(match) / total : 0.0;
}

EvalReport evaluate_corpus(const std::vector<TokenSeq>& candidates,
                           const std::vector<RefSet>& references,
                           const std::vector<TokenSeq>& pos_predicted,
                           const std::vector<TokenSeq>& pos_gold) {
  EvalReport rep;
  rep.bleu1 = bleu_n(candidates, references, 1);
  rep.bleu2 = bleu_n(candidates, references, 2);
  rep.bleu3 = bleu_n(candidates, references, 3);
  rep.bleu4 = bleu_n(candidates, references, 4);
  rep.ciderd_lite = ciderd_lite(candidates, references);
  rep.pos_accuracy = pos_accuracy(pos_predicted, pos_gold);
  rep.sample_count = static_cast<int>(candidates.size());
  return rep;
}

std::string report_to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["bleu1"] = r.bleu1;
  j["bleu2"] = r.bleu2;
  j["bleu3"] = r.bleu3;
  j["bleu4"] = r.bleu4;
  j["ciderd_lite"] = r.ciderd_lite;
  j["pos_accuracy"] = r.pos_accuracy;
  j["sample_count"] = r.sample_count;
  return j.dump(2);
}

}  // namespace crur
