#include "redace/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include <fmt/format.h>

#include "redace/errors.hpp"

namespace redace {

namespace {

constexpr const char* kConsonants = "bdfghjklmnprstvwz";
constexpr const char* kVowels = "aeiou";

std::vector<std::string> make_inventory(std::size_t size, std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0));
  const std::size_t nc = std::char_traits<char>::length(kConsonants);
  const std::size_t nv = std::char_traits<char>::length(kVowels);
  std::vector<std::string> words;
  std::unordered_set<std::string> seen;
  words.reserve(size);
  while (words.size() < size) {
    std::size_t syllables = 2 + rng.below(2);
    std::string w;
    for (std::size_t s = 0; s < syllables; ++s) {
      w.push_back(kConsonants[rng.below(nc)]);
      w.push_back(kVowels[rng.below(nv)]);
      if (rng.bernoulli(0.3)) w.push_back(kConsonants[rng.below(nc)]);
    }
    if (seen.insert(w).second) words.push_back(std::move(w));
  }
  return words;
}

bool valid_shape(const BetaShape& s) { return s.a > 0.0 && s.b > 0.0; }

bool unit(double p) { return p >= 0.0 && p <= 1.0; }

}  // namespace

void validate(const SimulatorConfig& cfg) {
  if (cfg.vocab_size < 2) throw ConfigError("vocab_size must be at least 2");
  if (!(cfg.zipf_exponent >= 0.0)) throw ConfigError("zipf_exponent must be nonnegative");
  if (cfg.sentence_len_min > cfg.sentence_len_max) {
    throw ConfigError("sentence_len_min exceeds sentence_len_max");
  }
  if (!unit(cfg.sub_rate) || !unit(cfg.del_rate) || !unit(cfg.ins_rate)) {
    throw ConfigError("edit rates must lie in [0,1]");
  }
  if (cfg.ins_rate >= 1.0) throw ConfigError("ins_rate must be below 1");
  if (!valid_shape(cfg.beta_correct) || !valid_shape(cfg.beta_error) ||
      !valid_shape(cfg.calibrated)) {
    throw ConfigError("beta shape parameters must be positive");
  }
  if (cfg.calibrated_constant && !unit(*cfg.calibrated_constant)) {
    throw ConfigError("calibrated_constant must lie in [0,1]");
  }
  double total = effective_sub_rate(cfg) + cfg.del_rate + cfg.ins_rate;
  if (!(total <= 1.0)) {
    throw ConfigError(fmt::format("sub+del+ins rates must not exceed 1 (got {})", total));
  }
}

double effective_sub_rate(const SimulatorConfig& cfg) {
  if (cfg.confidence_mode != ConfidenceMode::kCalibrated) return cfg.sub_rate;
  double mean_p = cfg.calibrated_constant
                      ? *cfg.calibrated_constant
                      : cfg.calibrated.a / (cfg.calibrated.a + cfg.calibrated.b);
  return 1.0 - mean_p;
}

Simulator::Simulator(SimulatorConfig cfg) : cfg_(std::move(cfg)) {
  validate(cfg_);
  inventory_ = make_inventory(cfg_.vocab_size, cfg_.language_seed);
  zipf_cdf_.resize(cfg_.vocab_size);
  double acc = 0.0;
  for (std::size_t r = 0; r < cfg_.vocab_size; ++r) {
    acc += std::pow(static_cast<double>(r + 1), -cfg_.zipf_exponent);
    zipf_cdf_[r] = acc;
  }
  for (double& c : zipf_cdf_) c /= acc;
}

WordSequence Simulator::sample_reference(Rng& rng) const {
  std::size_t span = cfg_.sentence_len_max - cfg_.sentence_len_min + 1;
  std::size_t len = cfg_.sentence_len_min + rng.below(span);
  WordSequence ref;
  ref.reserve(len);
  for (std::size_t i = 0; i < len; ++i) {
    double u = rng.uniform();
    auto it = std::upper_bound(zipf_cdf_.begin(), zipf_cdf_.end(), u);
    std::size_t rank = std::min<std::size_t>(it - zipf_cdf_.begin(), zipf_cdf_.size() - 1);
    ref.push_back(inventory_[rank]);
  }
  return ref;
}

Corruption Simulator::corrupt(const WordSequence& ref, Rng& rng) const {
  const double p_sub = effective_sub_rate(cfg_);
  Corruption out;
  auto& ops = out.true_ops.ops;
  auto insert_run = [&] {
    while (rng.bernoulli(cfg_.ins_rate)) {
      ops.push_back({EditKind::kDelete, out.hyp.size(), std::nullopt});
      out.hyp.push_back(inventory_[rng.below(inventory_.size())]);
    }
  };
  insert_run();
  for (std::size_t j = 0; j < ref.size(); ++j) {
    double u = rng.uniform();
    if (u < p_sub) {
      // Uniform over the inventory minus the original word.
      std::size_t pick = rng.below(inventory_.size() - 1);
      if (inventory_[pick] == ref[j]) pick = inventory_.size() - 1;
      ops.push_back({EditKind::kSubstitute, out.hyp.size(), j});
      out.hyp.push_back(inventory_[pick]);
    } else if (u < p_sub + cfg_.del_rate) {
      ops.push_back({EditKind::kInsert, std::nullopt, j});
    } else {
      ops.push_back({EditKind::kEqual, out.hyp.size(), j});
      out.hyp.push_back(ref[j]);
    }
    insert_run();
  }
  out.true_ops.cost = static_cast<std::size_t>(std::count_if(
      ops.begin(), ops.end(), [](const EditOp& op) { return op.kind != EditKind::kEqual; }));
  return out;
}

double assign_confidence(bool is_correct, const SimulatorConfig& cfg, Rng& rng) {
  switch (cfg.confidence_mode) {
    case ConfidenceMode::kBetaSeparated: {
      const BetaShape& s = is_correct ? cfg.beta_correct : cfg.beta_error;
      return rng.beta(s.a, s.b);
    }
    case ConfidenceMode::kUninformative:
      return rng.beta(cfg.beta_correct.a, cfg.beta_correct.b);
    case ConfidenceMode::kCalibrated: {
      if (cfg.calibrated_constant) return *cfg.calibrated_constant;
      const BetaShape& s = cfg.calibrated;
      return is_correct ? rng.beta(s.a + 1.0, s.b) : rng.beta(s.a, s.b + 1.0);
    }
  }
  throw ConfigError("unknown confidence mode");
}

std::vector<LabeledExample> Simulator::generate_split(const std::string& split_name,
                                                      std::size_t split_index,
                                                      std::size_t count) const {
  Rng text_rng(mix_seed(cfg_.seed, 10 + split_index));
  Rng conf_rng(mix_seed(cfg_.seed, 20 + split_index));
  std::vector<LabeledExample> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    WordSequence ref = sample_reference(text_rng);
    Corruption c = corrupt(ref, text_rng);
    LabeledExample ex;
    ex.id = fmt::format("{}-{:06d}", split_name, i);
    ex.labels = label_errors(align(c.hyp, ref), c.hyp.size());
    ex.confidences.reserve(c.hyp.size());
    for (Label l : ex.labels) {
      ex.confidences.push_back(assign_confidence(!is_error(l), cfg_, conf_rng));
    }
    ex.hyp = std::move(c.hyp);
    ex.ref = std::move(ref);
    out.push_back(std::move(ex));
  }
  return out;
}

CorpusBundle generate_corpus(std::size_t n_train, std::size_t n_dev, std::size_t n_test,
                             const SimulatorConfig& cfg) {
  Simulator sim(cfg);
  CorpusBundle bundle;
  bundle.train = sim.generate_split("train", 0, n_train);
  bundle.dev = sim.generate_split("dev", 1, n_dev);
  bundle.test = sim.generate_split("test", 2, n_test);
  return bundle;
}

}  // namespace redace
