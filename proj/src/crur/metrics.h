#ifndef CRUR_METRICS_H_
#define CRUR_METRICS_H_

#include <string>
#include <vector>

namespace crur {

// Caption bodies as token-id sequences (markers stripped).
using TokenSeq = std::vector<int>;
using RefSet = std::vector<TokenSeq>;

struct EvalReport {
  double bleu1 = 0.0, bleu2 = 0.0, bleu3 = 0.0, bleu4 = 0.0;
  double ciderd_lite = 0.0;
  double pos_accuracy = 0.0;
  int sample_count = 0;
};

// Corpus-level BLEU: geometric mean of clipped k-gram precisions for
// k <= n, brevity penalty exp(1 - r/c) for c < r with closest-reference r
// (ties to the shorter reference).  Zero match counts get add-one
// smoothing at sentence level; orders with no candidate k-grams anywhere
// are skipped; an all-empty candidate corpus scores 0.
double bleu_n(const std::vector<TokenSeq>& candidates,
              const std::vector<RefSet>& references, int n);

// Single-sentence BLEU_4 under the same smoothing; the policy-gradient
// reward.  Empty candidate scores 0.
double sentence_bleu4(const TokenSeq& candidate, const RefSet& references);

// Simplified consensus metric: per order n = 1..4, cosine similarity of
// TF-IDF k-gram vectors with CIDEr-D-style numerator clipping and a
// Gaussian length penalty (sigma = 6); averaged over references and
// orders, scaled by 10.  IDF is 1 + ln(N) - ln(max(1, df)) over reference
// sets, so a one-image corpus still rewards an exact match maximally.
double ciderd_lite(const std::vector<TokenSeq>& candidates,
                   const std::vector<RefSet>& references);

// Micro-averaged exact-match fraction; sentences align up to the shorter
// of the two tag sequences.
double pos_accuracy(const std::vector<TokenSeq>& predicted,
                    const std::vector<TokenSeq>& gold);

EvalReport evaluate_corpus(const std::vector<TokenSeq>& candidates,
                           const std::vector<RefSet>& references,
                           const std::vector<TokenSeq>& pos_predicted,
                           const std::vector<TokenSeq>& pos_gold);

// Single JSON object, fixed key order.
std::string report_to_json(const EvalReport& report);

}  // namespace crur

#endif  // CRUR_METRICS_H_
