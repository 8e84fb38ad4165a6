#include "redace/baselines.hpp"

#include <fmt/format.h>

#include "redace/errors.hpp"

namespace redace {

namespace {

template <typename Op>
LabelSequence combine(const LabelSequence& a, const LabelSequence& b, Op op) {
  if (a.size() != b.size()) {
    throw DataError(fmt::format("cannot combine label sequences of length {} and {}", a.size(),
                                b.size()));
  }
  LabelSequence out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    out[i] = op(is_error(a[i]), is_error(b[i])) ? Label::kError : Label::kNotError;
  }
  return out;
}

}  // namespace

LabelSequence co_detect(std::span<const double> confidences, double threshold) {
  LabelSequence out;
  out.reserve(confidences.size());
  for (double c : confidences) out.push_back(c < threshold ? Label::kError : Label::kNotError);
  return out;
}

LabelSequence combine_and(const LabelSequence& a, const LabelSequence& b) {
  return combine(a, b, [](bool x, bool y) { return x && y; });
}

LabelSequence combine_or(const LabelSequence& a, const LabelSequence& b) {
  return combine(a, b, [](bool x, bool y) { return x || y; });
}

MlmRanks mlm_word_ranks(const TaggerParameters& mlm_params, const ModelConfig& cfg,
                        const EncodedCorpus& corpus) {
  if (cfg.mode != ModelMode::kMlm) throw ConfigError("mlm detection needs an mlm-mode model");
  MlmRanks ranks;
  ranks.reserve(corpus.examples.size());
  for (const auto& ex : corpus.examples) {
    std::vector<std::optional<std::size_t>> per_word;
    per_word.reserve(ex.num_words);
    for (std::size_t w = 0; w < ex.num_words; ++w) {
      per_word.push_back(mlm_word_rank(ex, w, mlm_params, cfg));
    }
    ranks.push_back(std::move(per_word));
  }
  return ranks;
}

std::vector<LabelSequence> mlm_detect_from_ranks(const MlmRanks& ranks, std::size_t k) {
  std::vector<LabelSequence> out;
  out.reserve(ranks.size());
  for (const auto& per_word : ranks) {
    LabelSequence labels;
    labels.reserve(per_word.size());
    for (const auto& r : per_word) {
      bool suggested = !r || *r < k;
      labels.push_back(suggested ? Label::kNotError : Label::kError);
    }
    out.push_back(std::move(labels));
  }
  return out;
}

std::vector<LabelSequence> mlm_detect(const TaggerParameters& mlm_params, const ModelConfig& cfg,
                                      const EncodedCorpus& corpus, std::size_t k) {
  if (k > cfg.vocab_size) {
    throw ConfigError(fmt::format("k = {} exceeds the vocabulary size {}", k, cfg.vocab_size));
  }
  return mlm_detect_from_ranks(mlm_word_ranks(mlm_params, cfg, corpus), k);
}

}  // namespace redace
