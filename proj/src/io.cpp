#include "redace/io.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "redace/errors.hpp"

namespace redace {

namespace {

constexpr int kCheckpointVersion = 1;
constexpr const char* kCheckpointFormat = "redace-checkpoint";

void reject_unknown_keys(const Json& j, std::initializer_list<const char*> known,
                         const char* what) {
  if (!j.is_object()) throw ConfigError(fmt::format("{} must be a JSON object", what));
  std::set<std::string> allowed(known.begin(), known.end());
  for (const auto& [key, _] : j.items()) {
    if (!allowed.count(key)) throw ConfigError(fmt::format("unknown {} key '{}'", what, key));
  }
}

template <typename T>
void read_field(const Json& j, const char* key, T& out, const char* what) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->get<T>();
  } catch (const Json::exception& e) {
    throw ConfigError(fmt::format("{}.{}: {}", what, key, e.what()));
  }
}

BetaShape beta_from_json(const Json& j, const char* what) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
    throw ConfigError(fmt::format("{} must be a [a, b] pair", what));
  }
  return {j[0].get<double>(), j[1].get<double>()};
}

Json beta_to_json(const BetaShape& b) { return Json::array({b.a, b.b}); }

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError(fmt::format("cannot read {}", path.string()));
  return f;
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError(fmt::format("cannot write {}", path.string()));
  return f;
}

Json parse_json_text(const std::string& text, const std::string& where) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw StructuralError(fmt::format("{}: {}", where, e.what()));
  }
}

std::string label_name(Label l) { return is_error(l) ? "Error" : "NotError"; }

Label parse_label(const Json& v) {
  if (v.is_string()) {
    const auto& s = v.get_ref<const std::string&>();
    if (s == "Error") return Label::kError;
    if (s == "NotError") return Label::kNotError;
  }
  throw StructuralError(fmt::format("label {} is not \"Error\" or \"NotError\"", v.dump()));
}

template <typename T>
T get_required(const Json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw StructuralError(fmt::format("missing field '{}'", key));
  try {
    return it->get<T>();
  } catch (const Json::exception& e) {
    throw StructuralError(fmt::format("field '{}': {}", key, e.what()));
  }
}

}  // namespace

std::string to_string(ConfidenceMode m) {
  switch (m) {
    case ConfidenceMode::kBetaSeparated: return "beta_separated";
    case ConfidenceMode::kCalibrated: return "calibrated";
    case ConfidenceMode::kUninformative: return "uninformative";
  }
  return "beta_separated";
}

ConfidenceMode parse_confidence_mode(const std::string& s) {
  if (s == "beta_separated") return ConfidenceMode::kBetaSeparated;
  if (s == "calibrated") return ConfidenceMode::kCalibrated;
  if (s == "uninformative") return ConfidenceMode::kUninformative;
  throw ConfigError(fmt::format("unknown confidence mode '{}'", s));
}

std::string to_string(BinningAlgorithm a) {
  return a == BinningAlgorithm::kQuantile ? "quantile" : "equal_width";
}

BinningAlgorithm parse_binning_algorithm(const std::string& s) {
  if (s == "equal_width") return BinningAlgorithm::kEqualWidth;
  if (s == "quantile") return BinningAlgorithm::kQuantile;
  throw ConfigError(fmt::format("unknown binning algorithm '{}'", s));
}

Json to_json(const SimulatorConfig& c) {
  Json j{{"vocab_size", c.vocab_size},
         {"zipf_exponent", c.zipf_exponent},
         {"sentence_len_min", c.sentence_len_min},
         {"sentence_len_max", c.sentence_len_max},
         {"sub_rate", c.sub_rate},
         {"del_rate", c.del_rate},
         {"ins_rate", c.ins_rate},
         {"confidence_mode", to_string(c.confidence_mode)},
         {"beta_correct", beta_to_json(c.beta_correct)},
         {"beta_error", beta_to_json(c.beta_error)},
         {"calibrated", beta_to_json(c.calibrated)},
         {"calibrated_constant", nullptr},
         {"language_seed", c.language_seed},
         {"seed", c.seed}};
  if (c.calibrated_constant) j["calibrated_constant"] = *c.calibrated_constant;
  return j;
}

SimulatorConfig simulator_config_from_json(const Json& j) {
  const char* what = "simulator";
  reject_unknown_keys(j,
                      {"vocab_size", "zipf_exponent", "sentence_len_min",
                       "sentence_len_max", "sub_rate", "del_rate", "ins_rate",
                       "confidence_mode", "beta_correct", "beta_error", "calibrated",
                       "calibrated_constant", "language_seed", "seed"},
                      what);
  SimulatorConfig c;
  read_field(j, "vocab_size", c.vocab_size, what);
  read_field(j, "zipf_exponent", c.zipf_exponent, what);
  read_field(j, "sentence_len_min", c.sentence_len_min, what);
  read_field(j, "sentence_len_max", c.sentence_len_max, what);
  read_field(j, "sub_rate", c.sub_rate, what);
  read_field(j, "del_rate", c.del_rate, what);
  read_field(j, "ins_rate", c.ins_rate, what);
  read_field(j, "language_seed", c.language_seed, what);
  read_field(j, "seed", c.seed, what);
  std::string mode = to_string(c.confidence_mode);
  read_field(j, "confidence_mode", mode, what);
  c.confidence_mode = parse_confidence_mode(mode);
  if (j.contains("beta_correct")) c.beta_correct = beta_from_json(j["beta_correct"], "beta_correct");
  if (j.contains("beta_error")) c.beta_error = beta_from_json(j["beta_error"], "beta_error");
  if (j.contains("calibrated")) c.calibrated = beta_from_json(j["calibrated"], "calibrated");
  if (j.contains("calibrated_constant") && !j["calibrated_constant"].is_null()) {
    double v = 0.0;
    read_field(j, "calibrated_constant", v, what);
    c.calibrated_constant = v;
  }
  validate(c);
  return c;
}

Json to_json(const ModelConfig& c) {
  return Json{{"num_layers", c.num_layers}, {"num_heads", c.num_heads},
              {"hidden", c.hidden},         {"ffn_dim", c.ffn_dim},
              {"vocab_size", c.vocab_size}, {"num_bins", c.num_bins},
              {"max_len", c.max_len},       {"dropout", c.dropout},
              {"mode", std::string(to_string(c.mode))}};
}

ModelConfig model_config_from_json(const Json& j) {
  const char* what = "model";
  reject_unknown_keys(j,
                      {"num_layers", "num_heads", "hidden", "ffn_dim", "vocab_size",
                       "num_bins", "max_len", "dropout", "mode"},
                      what);
  ModelConfig c;
  read_field(j, "num_layers", c.num_layers, what);
  read_field(j, "num_heads", c.num_heads, what);
  read_field(j, "hidden", c.hidden, what);
  read_field(j, "ffn_dim", c.ffn_dim, what);
  read_field(j, "vocab_size", c.vocab_size, what);
  read_field(j, "num_bins", c.num_bins, what);
  read_field(j, "max_len", c.max_len, what);
  read_field(j, "dropout", c.dropout, what);
  std::string mode(to_string(c.mode));
  read_field(j, "mode", mode, what);
  c.mode = parse_model_mode(mode);
  return c;
}

Json to_json(const TrainConfig& c) {
  return Json{{"batch_size", c.batch_size},   {"learning_rate", c.learning_rate},
              {"weight_decay", c.weight_decay}, {"max_epochs", c.max_epochs},
              {"seed", c.seed},               {"eval_every", c.eval_every},
              {"adam_beta1", c.adam_beta1},   {"adam_beta2", c.adam_beta2},
              {"adam_eps", c.adam_eps},       {"mlm_mask_prob", c.mlm_mask_prob}};
}

TrainConfig train_config_from_json(const Json& j) {
  const char* what = "train";
  reject_unknown_keys(j,
                      {"batch_size", "learning_rate", "weight_decay", "max_epochs", "seed",
                       "eval_every", "adam_beta1", "adam_beta2", "adam_eps", "mlm_mask_prob"},
                      what);
  TrainConfig c;
  read_field(j, "batch_size", c.batch_size, what);
  read_field(j, "learning_rate", c.learning_rate, what);
  read_field(j, "weight_decay", c.weight_decay, what);
  read_field(j, "max_epochs", c.max_epochs, what);
  read_field(j, "seed", c.seed, what);
  read_field(j, "eval_every", c.eval_every, what);
  read_field(j, "adam_beta1", c.adam_beta1, what);
  read_field(j, "adam_beta2", c.adam_beta2, what);
  read_field(j, "adam_eps", c.adam_eps, what);
  read_field(j, "mlm_mask_prob", c.mlm_mask_prob, what);
  validate(c);
  return c;
}

Json to_json(const BinningConfig& c) {
  return Json{{"algorithm", to_string(c.algorithm)},
              {"num_bins", c.num_bins},
              {"boundaries", c.boundaries},
              {"hash", c.hash()}};
}

BinningConfig binning_config_from_json(const Json& j) {
  const char* what = "binning";
  reject_unknown_keys(j, {"algorithm", "num_bins", "boundaries", "hash"}, what);
  BinningConfig c;
  std::string alg = to_string(c.algorithm);
  read_field(j, "algorithm", alg, what);
  c.algorithm = parse_binning_algorithm(alg);
  read_field(j, "num_bins", c.num_bins, what);
  read_field(j, "boundaries", c.boundaries, what);
  validate(c);
  if (j.contains("hash") && j["hash"].get<std::string>() != c.hash()) {
    throw ConfigError("binning hash does not match its boundaries");
  }
  return c;
}

Json to_json(const TrainReport& r) {
  Json evals = Json::array();
  for (const auto& e : r.evaluations) {
    evals.push_back({{"epoch", e.epoch}, {"step", e.step}, {"dev_accuracy", e.dev_accuracy}});
  }
  return Json{{"epoch_train_loss", r.epoch_train_loss},
              {"evaluations", evals},
              {"selected_epoch", r.selected_epoch},
              {"selected_step", r.selected_step},
              {"selected_dev_accuracy", r.selected_dev_accuracy}};
}

Json to_json(const DatasetStats& s) {
  Json j{{"num_examples", s.num_examples},
         {"num_words", s.num_words},
         {"num_errors", s.num_errors},
         {"error_rate", nullptr}};
  if (s.error_rate_defined) j["error_rate"] = s.error_rate;
  return j;
}

Json to_json(const PRF& p) {
  return Json{{"tp", p.tp},
              {"fp", p.fp},
              {"fn", p.fn},
              {"precision", p.precision},
              {"recall", p.recall},
              {"f1", p.f1}};
}

Json to_json(const SignificanceResult& s) {
  return Json{{"f1_a", s.f1_a},
              {"f1_b", s.f1_b},
              {"subset_sizes", s.subset_sizes},
              {"zero_error_subsets", s.zero_error_subsets},
              {"mean_delta", s.mean_delta},
              {"t_statistic", std::isfinite(s.t_statistic) ? Json(s.t_statistic) : Json(nullptr)},
              {"df", s.df},
              {"p_value", s.p_value},
              {"significant", s.significant}};
}

Json to_json(const LabeledExample& ex) {
  Json labels = Json::array();
  for (Label l : ex.labels) labels.push_back(label_name(l));
  Json j{{"id", ex.id},
         {"hyp_words", ex.hyp},
         {"confidences", ex.confidences},
         {"labels", labels}};
  if (ex.ref) j["ref_words"] = *ex.ref;
  return j;
}

LabeledExample example_from_json(const Json& j) {
  if (!j.is_object()) throw StructuralError("record is not a JSON object");
  LabeledExample ex;
  ex.id = get_required<std::string>(j, "id");
  ex.hyp = get_required<WordSequence>(j, "hyp_words");
  ex.confidences = get_required<std::vector<double>>(j, "confidences");
  auto it = j.find("labels");
  if (it == j.end() || !it->is_array()) throw StructuralError("missing field 'labels'");
  for (const auto& v : *it) ex.labels.push_back(parse_label(v));
  if (j.contains("ref_words") && !j["ref_words"].is_null()) {
    ex.ref = get_required<WordSequence>(j, "ref_words");
  }
  validate_example(ex);
  return ex;
}

std::vector<LabeledExample> read_examples(std::istream& in) {
  std::vector<LabeledExample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(example_from_json(parse_json_text(line, "record")));
    } catch (const StructuralError& e) {
      throw StructuralError(fmt::format("line {}: {}", lineno, e.what()));
    } catch (const RangeError& e) {
      throw RangeError(fmt::format("line {}: {}", lineno, e.what()));
    } catch (const DataError& e) {
      throw DataError(fmt::format("line {}: {}", lineno, e.what()));
    }
  }
  return out;
}

std::vector<LabeledExample> read_examples(const std::filesystem::path& path) {
  auto f = open_in(path);
  return read_examples(f);
}

void write_examples(std::ostream& out, const std::vector<LabeledExample>& examples) {
  for (const auto& ex : examples) out << to_json(ex).dump() << '\n';
}

void write_examples(const std::filesystem::path& path,
                    const std::vector<LabeledExample>& examples) {
  auto f = open_out(path);
  write_examples(f, examples);
}

void write_predictions(const std::filesystem::path& path,
                       const std::vector<WordPrediction>& preds) {
  auto f = open_out(path);
  for (const auto& p : preds) {
    Json labels = Json::array();
    for (Label l : p.labels) labels.push_back(label_name(l));
    f << Json{{"id", p.id}, {"labels", labels}, {"error_probs", p.error_prob}}.dump() << '\n';
  }
}

std::vector<WordPrediction> read_predictions(const std::filesystem::path& path) {
  auto f = open_in(path);
  std::vector<WordPrediction> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const Json j = parse_json_text(line, "prediction");
      WordPrediction p;
      p.id = get_required<std::string>(j, "id");
      for (const auto& v : j.at("labels")) p.labels.push_back(parse_label(v));
      if (j.contains("error_probs")) p.error_prob = get_required<std::vector<double>>(j, "error_probs");
      out.push_back(std::move(p));
    } catch (const Json::exception& e) {
      throw StructuralError(fmt::format("line {}: {}", lineno, e.what()));
    } catch (const StructuralError& e) {
      throw StructuralError(fmt::format("line {}: {}", lineno, e.what()));
    }
  }
  return out;
}

void save_vocab(const std::filesystem::path& path, const Vocabulary& vocab) {
  auto f = open_out(path);
  for (const auto& p : vocab.pieces()) f << p << '\n';
}

Vocabulary load_vocab(const std::filesystem::path& path) {
  auto f = open_in(path);
  std::vector<std::string> pieces;
  std::string line;
  while (std::getline(f, line)) pieces.push_back(line);
  return Vocabulary::from_pieces(std::move(pieces));
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  Json tensors = Json::array();
  // for_each_tensor needs a mutable struct.
  TaggerParameters copy = ckpt.params;
  for_each_tensor(copy, [&](const std::string& name, Mat& m, bool) {
    std::vector<double> data(m.data(), m.data() + m.size());
    tensors.push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}, {"data", data}});
  });
  Json j{{"format", kCheckpointFormat},
         {"version", kCheckpointVersion},
         {"model", to_json(ckpt.model)},
         {"vocab_hash", ckpt.vocab_hash},
         {"binning_hash", ckpt.binning_hash},
         {"tensors", tensors}};
  auto f = open_out(path);
  f << j.dump() << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const Json j = read_json(path);
  if (!j.is_object() || j.value("format", "") != kCheckpointFormat) {
    throw StructuralError(fmt::format("{} is not a checkpoint", path.string()));
  }
  if (j.value("version", 0) != kCheckpointVersion) {
    throw StructuralError(fmt::format("unsupported checkpoint version {}", j["version"].dump()));
  }
  Checkpoint ckpt;
  ckpt.model = model_config_from_json(j.at("model"));
  validate(ckpt.model);
  ckpt.vocab_hash = get_required<std::string>(j, "vocab_hash");
  ckpt.binning_hash = get_required<std::string>(j, "binning_hash");
  ckpt.params = zero_parameters(ckpt.model);
  const Json& tensors = j.at("tensors");
  std::size_t idx = 0;
  for_each_tensor(ckpt.params, [&](const std::string& name, Mat& m, bool) {
    if (idx >= tensors.size()) throw StructuralError(fmt::format("checkpoint lacks {}", name));
    const Json& t = tensors[idx++];
    if (t.at("name").get<std::string>() != name) {
      throw StructuralError(
          fmt::format("expected tensor {} but found {}", name, t.at("name").dump()));
    }
    const auto rows = t.at("rows").get<Eigen::Index>();
    const auto cols = t.at("cols").get<Eigen::Index>();
    if (rows != m.rows() || cols != m.cols()) {
      throw ConfigError(fmt::format("tensor {} is {}x{} but the model needs {}x{}", name, rows,
                                    cols, m.rows(), m.cols()));
    }
    const auto data = t.at("data").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(data.size()) != m.size()) {
      throw StructuralError(fmt::format("tensor {} has {} values", name, data.size()));
    }
    std::copy(data.begin(), data.end(), m.data());
  });
  if (idx != tensors.size()) throw StructuralError("checkpoint has extra tensors");
  check_shapes(ckpt.params, ckpt.model);
  return ckpt;
}

Json read_json(const std::filesystem::path& path) {
  auto f = open_in(path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_json_text(ss.str(), path.string());
}

void write_json(const std::filesystem::path& path, const Json& j) {
  auto f = open_out(path);
  f << j.dump(2) << '\n';
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  auto f = open_out(path);
  f << text;
}

}  // namespace redace
