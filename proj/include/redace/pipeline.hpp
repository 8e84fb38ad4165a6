#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "redace/encode.hpp"
#include "redace/eval.hpp"
#include "redace/model.hpp"
#include "redace/simulate.hpp"
#include "redace/train.hpp"

namespace redace {

struct EncodingConfig {
  std::size_t vocab_target = 2000;
  std::size_t min_word_count = 2;
  BinningAlgorithm binning = BinningAlgorithm::kEqualWidth;
  std::size_t num_bins = 10;
  std::size_t max_len = kDefaultMaxLen;

  bool operator==(const EncodingConfig&) const = default;
};

// Vocabulary and quantile boundaries are fitted on the training split only.
struct PreparedData {
  Vocabulary vocab;
  BinningConfig binning;
  EncodedCorpus train;
  EncodedCorpus dev;
  EncodedCorpus test;
};

BinningConfig fit_binning(std::span<const LabeledExample> train, BinningAlgorithm algorithm,
                          std::size_t num_bins);

PreparedData prepare(const CorpusBundle& data, const EncodingConfig& cfg);

// Fills vocab_size, num_bins and max_len from the prepared data.
ModelConfig model_for(const PreparedData& data, ModelConfig base, ModelMode mode);

struct TrainedTagger {
  Checkpoint checkpoint;
  TrainReport report;
};

TrainedTagger train_tagger(const PreparedData& data, const ModelConfig& model,
                           const TrainConfig& train);

std::vector<LabelSequence> gold_labels(std::span<const LabeledExample> examples);
std::vector<LabelSequence> prediction_labels(const std::vector<WordPrediction>& preds);
std::vector<std::vector<double>> confidences_of(std::span<const LabeledExample> examples);

std::vector<LabelSequence> co_detect_all(const std::vector<std::vector<double>>& conf,
                                         double threshold);

// Threshold tuned on dev word F1, then applied to test.
struct TunedBaseline {
  TuningCurve curve;
  std::vector<LabelSequence> test_pred;
};

TunedBaseline tune_co(const CorpusBundle& data);

struct AblationRow {
  BinningAlgorithm algorithm = BinningAlgorithm::kEqualWidth;
  std::size_t num_bins = 0;
  TrainReport report;
  PRF dev;
  PRF test;
};

// Trains one RED-ACE tagger per (algorithm, bin count) on the same corpus.
std::vector<AblationRow> ablate_binning(const CorpusBundle& data, const EncodingConfig& base,
                                        std::span<const std::size_t> bin_counts,
                                        std::span<const BinningAlgorithm> algorithms,
                                        const ModelConfig& model, const TrainConfig& train);

}  // namespace redace
