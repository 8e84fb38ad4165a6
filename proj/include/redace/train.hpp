#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "redace/align.hpp"
#include "redace/encode.hpp"
#include "redace/model.hpp"

namespace redace {

struct TrainConfig {
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  double weight_decay = 0.01;
  std::size_t max_epochs = 8;
  std::uint64_t seed = 0;
  // Dev evaluation every this many steps; 0 evaluates once per epoch.
  std::size_t eval_every = 0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double mlm_mask_prob = 0.15;

  bool operator==(const TrainConfig&) const = default;
};

void validate(const TrainConfig& cfg);

// Fine-tuning values for a BERT-base sized pretrained tagger.
// Training from scratch at desk scale uses the defaults above.
TrainConfig full_scale_train_profile();

struct DevEvaluation {
  std::size_t epoch = 0;
  std::size_t step = 0;
  double dev_accuracy = 0.0;

  bool operator==(const DevEvaluation&) const = default;
};

struct TrainReport {
  std::vector<double> epoch_train_loss;
  std::vector<DevEvaluation> evaluations;
  std::size_t selected_epoch = 0;
  std::size_t selected_step = 0;
  double selected_dev_accuracy = 0.0;

  bool operator==(const TrainReport&) const = default;
};

struct TrainResult {
  TaggerParameters params;
  TrainReport report;
};

// Decoupled weight decay, scaled by the learning rate and applied only to
// tensors flagged as decaying.
class AdamW {
 public:
  AdamW(const TaggerParameters& shape_like, const TrainConfig& cfg);
  void step(TaggerParameters& params, const TaggerParameters& grads);
  std::size_t steps() const { return t_; }

 private:
  TrainConfig cfg_;
  TaggerParameters m_;
  TaggerParameters v_;
  std::size_t t_ = 0;
};

// Token-level argmax accuracy over every non-PAD position.
double tagging_accuracy(const TaggerParameters& params, const ModelConfig& cfg,
                        const EncodedCorpus& corpus);

// Mean-token cross-entropy with AdamW; returns the checkpoint with the best dev
// tagging accuracy (earliest on ties). Throws NumericalError on divergence.
TrainResult train(const EncodedCorpus& train_set, const EncodedCorpus& dev_set,
                  const ModelConfig& model_cfg, const TrainConfig& train_cfg);

// Masked-LM objective: each content token is picked with mlm_mask_prob (at
// least one per sequence) and replaced by MASK 80%, a random piece 10%, or
// kept 10%. Returns the final parameters.
TrainResult train_mlm(const EncodedCorpus& text, const ModelConfig& model_cfg,
                      const TrainConfig& train_cfg);

struct Checkpoint {
  ModelConfig model;
  TaggerParameters params;
  std::string vocab_hash;
  std::string binning_hash;
};

struct WordPrediction {
  std::string id;
  LabelSequence labels;
  std::vector<double> error_prob;  // max token P(Error); 0 for truncated words

  bool operator==(const WordPrediction&) const = default;
};

// A word is Error iff one of its tokens has logit(Error) > logit(NotError).
// Words lost to truncation are NotError.
std::vector<WordPrediction> predict_word_labels(const TaggerParameters& params,
                                                const ModelConfig& cfg,
                                                const EncodedCorpus& corpus,
                                                std::size_t batch_size = 64);

// Same, after checking that corpus and checkpoint share vocabulary and binning.
std::vector<WordPrediction> predict_word_labels(const Checkpoint& ckpt,
                                                const EncodedCorpus& corpus,
                                                std::size_t batch_size = 64);

void check_compatible(const Checkpoint& ckpt, const EncodedCorpus& corpus);

struct Span {
  std::size_t start = 0;
  std::size_t end = 0;  // inclusive

  bool operator==(const Span&) const = default;
  auto operator<=>(const Span&) const = default;
};

// Maximal runs of consecutive Error words.
std::vector<Span> extract_spans(const LabelSequence& labels);

LabelSequence paint_spans(const std::vector<Span>& spans, std::size_t length);

}  // namespace redace
