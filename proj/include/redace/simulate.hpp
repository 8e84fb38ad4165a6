#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "redace/align.hpp"
#include "redace/random.hpp"

namespace redace {

enum class ConfidenceMode { kBetaSeparated, kCalibrated, kUninformative };

struct BetaShape {
  double a = 1.0;
  double b = 1.0;

  bool operator==(const BetaShape&) const = default;
};

// Synthetic ASR channel. References are Zipfian draws over a vocab_size-word
// inventory; substitutions and insertions draw uniformly from it.
struct SimulatorConfig {
  std::size_t vocab_size = 20000;
  double zipf_exponent = 1.85;
  std::size_t sentence_len_min = 6;
  std::size_t sentence_len_max = 14;
  double sub_rate = 0.09;
  double del_rate = 0.01;
  double ins_rate = 0.01;
  ConfidenceMode confidence_mode = ConfidenceMode::kBetaSeparated;
  BetaShape beta_correct{9.0, 1.0};
  BetaShape beta_error{2.0, 5.0};
  // Calibrated mode: p ~ Beta(calibrated) unless calibrated_constant is set.
  BetaShape calibrated{8.0, 2.0};
  std::optional<double> calibrated_constant;
  // Seeds the word inventory, so corpora with different seeds share a language.
  std::uint64_t language_seed = 0;
  std::uint64_t seed = 0;

  bool operator==(const SimulatorConfig&) const = default;
};

// Throws ConfigError on rates outside [0,1], rates summing above 1,
// non-positive shapes, or inconsistent sizes.
void validate(const SimulatorConfig& cfg);

// In calibrated mode the per-word substitution probability is 1 − E[p];
// otherwise it is sub_rate.
double effective_sub_rate(const SimulatorConfig& cfg);

struct Corruption {
  WordSequence hyp;
  EditPath true_ops;
};

struct CorpusBundle {
  std::vector<LabeledExample> train;
  std::vector<LabeledExample> dev;
  std::vector<LabeledExample> test;
};

class Simulator {
 public:
  explicit Simulator(SimulatorConfig cfg);

  const SimulatorConfig& config() const { return cfg_; }
  const std::vector<std::string>& inventory() const { return inventory_; }

  WordSequence sample_reference(Rng& rng) const;

  // Per reference word: substitute with p_sub, else delete with del_rate.
  // Before every word and at the end, a geometric number of random words is
  // inserted with continuation probability ins_rate.
  Corruption corrupt(const WordSequence& ref, Rng& rng) const;

  // Text is drawn from one stream and confidences from another, so configs
  // that differ only in confidence settings share hypotheses and labels.
  std::vector<LabeledExample> generate_split(const std::string& split_name,
                                             std::size_t split_index,
                                             std::size_t count) const;

 private:
  SimulatorConfig cfg_;
  std::vector<std::string> inventory_;
  std::vector<double> zipf_cdf_;
};

// beta_separated: Beta(beta_correct) or Beta(beta_error) by correctness.
// uninformative: Beta(beta_correct) regardless. calibrated: draws from the
// posterior of p given correctness (Beta(a+1,b) or Beta(a,b+1)), which has the
// same joint law as drawing p and flipping correctness with probability 1−p.
double assign_confidence(bool is_correct, const SimulatorConfig& cfg, Rng& rng);

// Labels come from align + label_errors on (hyp, ref), not from true_ops.
CorpusBundle generate_corpus(std::size_t n_train, std::size_t n_dev, std::size_t n_test,
                             const SimulatorConfig& cfg);

}  // namespace redace
