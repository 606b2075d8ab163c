#ifndef CRUR_TRAIN_H_
#define CRUR_TRAIN_H_

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "crur/config.h"
#include "crur/corpus.h"
#include "crur/params.h"
#include "crur/rng.h"
#include "crur/tensor.h"

namespace crur {

// Centers a feature vector: v - mean(v). Idempotent; result mean is zero to
// 1e-12. Preprocessing only, so the output is a plain untaped tensor.
Tensor normalize_feature(const Tensor& v);

// Subtracts the single global scalar mean over every entry of an embedding
// table (any rank). Preserves the requires_grad flag of the input.
Tensor normalize_embeddings(const Tensor& table);

// Corpus sample in model terms: centered context feature, untouched
// multi-hot tag feature, token-id reference bodies with aligned tag ids.
struct EncodedSample {
  Tensor v, w;
  std::vector<std::vector<int>> refs;
  std::vector<std::vector<int>> pos;
};

// normalize_feature on v (w is already a probability vector) plus vocabulary
// encoding of the reference words.
std::vector<EncodedSample> encode_samples(const std::vector<SceneSample>& in,
                                          const Vocab& vocab);

// Named gradient buffers shared by the cross-entropy and SCST updates.
// Names follow CrurParams::for_each_param.
class GradAccumulator {
 public:
  void add(const std::string& name, const Tensor& grad);
  void scale_all(double s);
  double l2_norm() const;  // global norm over every buffer
  // Rescales so the global norm is at most max_norm (+1e-9 slack).
  void clip_to(double max_norm);
  void apply_sgd(CrurParams& params, double lr) const;
  void clear();
  bool empty() const { return by_name_.empty(); }

 private:
  std::map<std::string, std::vector<double>> by_name_;
};

// One teacher-forced rollout over reference ref_index of a sample. The step
// budget is the reference length plus the stop marker; with probability
// jitter_prob each fed token is the model's own masked argmax instead of
// gold. Builds a taped graph when called under a live Tape.
struct PairRollout {
  Tensor loss;  // scalar: mean token NLL + pos_loss_weight * mean tag NLL
  int steps = 0;
  int correct_tokens = 0;
  int correct_tags = 0;
  std::vector<int> predictions;      // masked argmax at each step
  std::vector<int> tag_predictions;  // pos-head argmax at each step
  std::vector<int> fed_tokens;       // what steps 2..T actually consumed
};
PairRollout teacher_forced_pair(const CrurParams& params,
                                const EncodedSample& sample, int ref_index,
                                const TrainConfig& cfg, Rng& rng,
                                bool training_mode);

struct EpochStats {
  double mean_loss = 0.0;
  double token_accuracy = 0.0;
  double pos_accuracy = 0.0;
  int pairs = 0;  // (sample, reference) rollouts this epoch
};

// One pass over every (sample, reference) pair in corpus order. Gradients
// accumulate across batch_size pairs, are averaged, clipped to grad_clip,
// and applied as a plain SGD step (the final partial batch included). The
// per-sample RNG stream is derived from (seed, epoch, sample index), so a
// resumed run replays the exact draws of an uninterrupted one.
EpochStats xent_train_epoch(CrurParams& params,
                            const std::vector<EncodedSample>& corpus,
                            const TrainConfig& cfg, int epoch);

// Reward for one caption body; refs are token-id bodies.
using RewardFn = std::function<double(const std::vector<int>& body,
                                      const std::vector<std::vector<int>>& refs)>;
RewardFn reward_for(RewardMetric metric);

struct ScstStats {
  double mean_sampled_reward = 0.0;
  double mean_greedy_reward = 0.0;
};

// One self-critical gradient step over a batch: per sample, a multinomial
// rollout is scored against the greedy baseline and its advantage weights
// the sampled log-likelihood. Empty sampled captions take reward 0 and
// contribute nothing. With every advantage zero the parameters are
// untouched. step keys the RNG stream like epoch does for xent.
ScstStats scst_step(CrurParams& params,
                    const std::vector<EncodedSample>& batch,
                    const TrainConfig& cfg, int step_index);
// Test seam: same, with an explicit reward function.
ScstStats scst_step_with_reward(CrurParams& params,
                                const std::vector<EncodedSample>& batch,
                                const TrainConfig& cfg, int step_index,
                                const RewardFn& reward);

// Greedy-decodes every sample and scores the bodies with corpus BLEU_4.
double corpus_bleu4(const CrurParams& params,
                    const std::vector<EncodedSample>& corpus, int max_len);

// Tab-separated training log line: epoch, loss, token_acc, pos_acc,
// bleu4_train.
std::string epoch_log_line(int epoch, const EpochStats& stats,
                           double bleu4_train);

}  // namespace crur

#endif  // CRUR_TRAIN_H_
