#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "redace/align.hpp"
#include "redace/encode.hpp"
#include "redace/model.hpp"

namespace redace {

// Confidence-only detector: Error iff confidence < threshold (strict).
LabelSequence co_detect(std::span<const double> confidences, double threshold);

// Elementwise AND / OR on the Error flag. Throws DataError on length mismatch.
LabelSequence combine_and(const LabelSequence& a, const LabelSequence& b);
LabelSequence combine_or(const LabelSequence& a, const LabelSequence& b);

// Worst-token MLM rank per word, computed once so any k can be applied
// without rerunning the model. nullopt marks words lost to truncation.
using MlmRanks = std::vector<std::vector<std::optional<std::size_t>>>;

MlmRanks mlm_word_ranks(const TaggerParameters& mlm_params, const ModelConfig& cfg,
                        const EncodedCorpus& corpus);

// Error iff the word is not in the MLM's top-k suggestions.
std::vector<LabelSequence> mlm_detect_from_ranks(const MlmRanks& ranks, std::size_t k);

std::vector<LabelSequence> mlm_detect(const TaggerParameters& mlm_params, const ModelConfig& cfg,
                                      const EncodedCorpus& corpus, std::size_t k);

}  // namespace redace
