#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

#include "redace/align.hpp"
#include "redace/encode.hpp"
#include "redace/eval.hpp"
#include "redace/model.hpp"
#include "redace/simulate.hpp"
#include "redace/train.hpp"

namespace redace {

using Json = nlohmann::json;

std::string to_string(ConfidenceMode m);
ConfidenceMode parse_confidence_mode(const std::string& s);
std::string to_string(BinningAlgorithm a);
BinningAlgorithm parse_binning_algorithm(const std::string& s);

// Missing keys keep their defaults; unknown keys and malformed values throw
// ConfigError.
Json to_json(const SimulatorConfig& cfg);
SimulatorConfig simulator_config_from_json(const Json& j);
Json to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const Json& j);
Json to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const Json& j);
Json to_json(const BinningConfig& cfg);
BinningConfig binning_config_from_json(const Json& j);

Json to_json(const TrainReport& r);
Json to_json(const DatasetStats& s);
Json to_json(const PRF& p);
Json to_json(const SignificanceResult& s);

// {"id","hyp_words","confidences","labels":["Error"|"NotError"],"ref_words"?}
Json to_json(const LabeledExample& ex);
LabeledExample example_from_json(const Json& j);

// One record per line. Errors name the offending line.
std::vector<LabeledExample> read_examples(std::istream& in);
std::vector<LabeledExample> read_examples(const std::filesystem::path& path);
void write_examples(std::ostream& out, const std::vector<LabeledExample>& examples);
void write_examples(const std::filesystem::path& path,
                    const std::vector<LabeledExample>& examples);

// {"id","labels","error_probs"} per line.
void write_predictions(const std::filesystem::path& path,
                       const std::vector<WordPrediction>& preds);
std::vector<WordPrediction> read_predictions(const std::filesystem::path& path);

// One piece per line.
void save_vocab(const std::filesystem::path& path, const Vocabulary& vocab);
Vocabulary load_vocab(const std::filesystem::path& path);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

Json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const Json& j);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace redace
