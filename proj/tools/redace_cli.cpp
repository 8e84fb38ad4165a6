// Command-line driver: simulate → label → train → predict → tune → evaluate → report.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "redace/align.hpp"
#include "redace/baselines.hpp"
#include "redace/encode.hpp"
#include "redace/errors.hpp"
#include "redace/eval.hpp"
#include "redace/io.hpp"
#include "redace/model.hpp"
#include "redace/pipeline.hpp"
#include "redace/simulate.hpp"
#include "redace/train.hpp"

namespace fs = std::filesystem;
using namespace redace;

namespace {

struct Sizes {
  std::size_t train = 5000;
  std::size_t dev = 500;
  std::size_t test = 500;
};

// Full resolved configuration shared by all commands; each uses its sections.
struct RunConfig {
  SimulatorConfig simulator;
  Sizes sizes;
  EncodingConfig encoding;
  ModelConfig model;
  TrainConfig train;
  std::size_t significance_subsets = 100;
  std::uint64_t significance_seed = 0;
};

Json to_json(const EncodingConfig& c) {
  return Json{{"vocab_target", c.vocab_target},
              {"min_word_count", c.min_word_count},
              {"binning", to_string(c.binning)},
              {"num_bins", c.num_bins},
              {"max_len", c.max_len}};
}

EncodingConfig encoding_from_json(const Json& j) {
  EncodingConfig c;
  for (const auto& [key, v] : j.items()) {
    if (key == "vocab_target") c.vocab_target = v.get<std::size_t>();
    else if (key == "min_word_count") c.min_word_count = v.get<std::size_t>();
    else if (key == "binning") c.binning = parse_binning_algorithm(v.get<std::string>());
    else if (key == "num_bins") c.num_bins = v.get<std::size_t>();
    else if (key == "max_len") c.max_len = v.get<std::size_t>();
    else throw ConfigError(fmt::format("unknown encoding key '{}'", key));
  }
  return c;
}

Json to_json(const RunConfig& c) {
  return Json{{"simulator", to_json(c.simulator)},
              {"sizes", {{"train", c.sizes.train}, {"dev", c.sizes.dev}, {"test", c.sizes.test}}},
              {"encoding", to_json(c.encoding)},
              {"model", to_json(c.model)},
              {"train", to_json(c.train)},
              {"significance", {{"subsets", c.significance_subsets},
                                {"seed", c.significance_seed}}}};
}

RunConfig run_config_from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  RunConfig c;
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "simulator") {
        c.simulator = simulator_config_from_json(v);
      } else if (key == "sizes") {
        c.sizes.train = v.value("train", c.sizes.train);
        c.sizes.dev = v.value("dev", c.sizes.dev);
        c.sizes.test = v.value("test", c.sizes.test);
      } else if (key == "encoding") {
        c.encoding = encoding_from_json(v);
      } else if (key == "model") {
        c.model = model_config_from_json(v);
      } else if (key == "train") {
        c.train = train_config_from_json(v);
      } else if (key == "significance") {
        c.significance_subsets = v.value("subsets", c.significance_subsets);
        c.significance_seed = v.value("seed", c.significance_seed);
      } else {
        throw ConfigError(fmt::format("unknown config section '{}'", key));
      }
    }
  } catch (const Json::exception& e) {
    throw ConfigError(e.what());
  }
  return c;
}

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
};

RunConfig load_run_config(const Common& common) {
  RunConfig c;
  if (!common.config_path.empty()) {
    try {
      c = run_config_from_json(read_json(common.config_path));
    } catch (const StructuralError& e) {
      throw ConfigError(e.what());
    } catch (const DataError& e) {
      throw ConfigError(e.what());
    }
  }
  return c;
}

void echo_config(const Common& common, const std::string& command, Json resolved) {
  resolved["command"] = command;
  write_json(fs::path(common.out) / "config.resolved.json", resolved);
}

CorpusBundle read_bundle(const fs::path& dir) {
  CorpusBundle b;
  b.train = read_examples(dir / "train.jsonl");
  b.dev = read_examples(dir / "dev.jsonl");
  if (fs::exists(dir / "test.jsonl")) b.test = read_examples(dir / "test.jsonl");
  return b;
}

// ---------------------------------------------------------------------------

int cmd_simulate(const Common& common) {
  RunConfig c = load_run_config(common);
  if (common.seed) c.simulator.seed = *common.seed;
  validate(c.simulator);
  const CorpusBundle b = generate_corpus(c.sizes.train, c.sizes.dev, c.sizes.test, c.simulator);
  const fs::path out(common.out);
  write_examples(out / "train.jsonl", b.train);
  write_examples(out / "dev.jsonl", b.dev);
  write_examples(out / "test.jsonl", b.test);
  write_json(out / "stats.json", Json{{"train", to_json(dataset_stats(b.train))},
                                      {"dev", to_json(dataset_stats(b.dev))},
                                      {"test", to_json(dataset_stats(b.test))}});
  echo_config(common, "simulate",
              Json{{"simulator", to_json(c.simulator)},
                   {"sizes", {{"train", c.sizes.train}, {"dev", c.sizes.dev}, {"test", c.sizes.test}}}});
  return 0;
}

WordSequence split_words(const std::string& line) {
  WordSequence words;
  std::string cur;
  for (char ch : line) {
    if (ch == ' ' || ch == '\t' || ch == '\r') {
      if (!cur.empty()) words.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError(fmt::format("cannot read {}", path.string()));
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(f, line)) lines.push_back(line);
  return lines;
}

LabeledExample relabel(LabeledExample ex, const NormalizerConfig& norm) {
  const EditPath path = align(ex.hyp, *ex.ref, norm);
  ex.labels = label_errors(path, ex.hyp.size());
  return ex;
}

int cmd_label(const Common& common, const std::string& hyp_file, const std::string& ref_file,
              const std::string& jsonl_file, bool strip_punct) {
  NormalizerConfig norm;
  norm.strip_punctuation = strip_punct;
  std::vector<LabeledExample> out;
  if (!jsonl_file.empty()) {
    std::size_t lineno = 0;
    for (const auto& line : read_lines(jsonl_file)) {
      ++lineno;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      Json j;
      try {
        j = Json::parse(line);
      } catch (const Json::parse_error& e) {
        throw StructuralError(fmt::format("line {}: {}", lineno, e.what()));
      }
      LabeledExample ex;
      try {
        ex.id = j.at("id").get<std::string>();
        ex.hyp = j.at("hyp_words").get<WordSequence>();
        ex.ref = j.at("ref_words").get<WordSequence>();
        ex.confidences = j.contains("confidences")
                             ? j["confidences"].get<std::vector<double>>()
                             : std::vector<double>(ex.hyp.size(), 1.0);
      } catch (const Json::exception& e) {
        throw StructuralError(fmt::format("line {}: {}", lineno, e.what()));
      }
      ex = relabel(std::move(ex), norm);
      validate_example(ex);
      out.push_back(std::move(ex));
    }
  } else {
    if (hyp_file.empty() || ref_file.empty()) {
      throw ConfigError("label needs --hyp and --ref, or --jsonl");
    }
    const auto hyps = read_lines(hyp_file);
    const auto refs = read_lines(ref_file);
    if (hyps.size() != refs.size()) {
      throw DataError(fmt::format("{} hypothesis lines but {} reference lines", hyps.size(),
                                  refs.size()));
    }
    for (std::size_t i = 0; i < hyps.size(); ++i) {
      LabeledExample ex;
      ex.id = fmt::format("{:06d}", i);
      ex.hyp = split_words(hyps[i]);
      ex.ref = split_words(refs[i]);
      ex.confidences.assign(ex.hyp.size(), 1.0);
      out.push_back(relabel(std::move(ex), norm));
    }
  }
  write_examples(fs::path(common.out) / "labeled.jsonl", out);
  echo_config(common, "label",
              Json{{"hyp", hyp_file}, {"ref", ref_file}, {"jsonl", jsonl_file},
                   {"normalizer", {{"lowercase", norm.lowercase},
                                   {"strip_punctuation", norm.strip_punctuation}}}});
  return 0;
}

void save_model_dir(const fs::path& dir, const PreparedData& data, const Checkpoint& ckpt) {
  save_checkpoint(dir / "checkpoint.json", ckpt);
  save_vocab(dir / "vocab.txt", data.vocab);
  write_json(dir / "binning.json", to_json(data.binning));
}

struct ModelDir {
  Checkpoint checkpoint;
  Vocabulary vocab;
  BinningConfig binning;
};

ModelDir load_model_dir(const fs::path& dir) {
  ModelDir m;
  m.checkpoint = load_checkpoint(dir / "checkpoint.json");
  m.vocab = load_vocab(dir / "vocab.txt");
  m.binning = binning_config_from_json(read_json(dir / "binning.json"));
  return m;
}

int cmd_train(const Common& common, const std::string& data_dir, const std::string& mode) {
  RunConfig c = load_run_config(common);
  if (common.seed) c.train.seed = *common.seed;
  if (!mode.empty()) c.model.mode = parse_model_mode(mode);
  validate(c.train);
  const CorpusBundle bundle = read_bundle(data_dir);
  const PreparedData data = prepare(bundle, c.encoding);
  const ModelConfig mcfg = model_for(data, c.model, c.model.mode);
  Checkpoint ckpt;
  TrainReport report;
  if (mcfg.mode == ModelMode::kMlm) {
    TrainResult r = train_mlm(data.train, mcfg, c.train);
    ckpt = Checkpoint{mcfg, std::move(r.params), data.vocab.hash(), data.binning.hash()};
    report = std::move(r.report);
  } else {
    TrainedTagger t = train_tagger(data, mcfg, c.train);
    ckpt = std::move(t.checkpoint);
    report = std::move(t.report);
  }
  const fs::path out(common.out);
  save_model_dir(out, data, ckpt);
  write_json(out / "train_report.json", to_json(report));
  Json resolved = to_json(c);
  resolved["model"] = to_json(mcfg);
  resolved["data"] = data_dir;
  echo_config(common, "train", resolved);
  return 0;
}

std::vector<WordPrediction> as_predictions(const std::vector<LabeledExample>& examples,
                                           const std::vector<LabelSequence>& labels) {
  std::vector<WordPrediction> out;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    WordPrediction p;
    p.id = examples[i].id;
    p.labels = labels[i];
    for (double c : examples[i].confidences) p.error_prob.push_back(1.0 - c);
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<WordPrediction> tagger_predictions(const std::string& model_dir,
                                               const std::vector<LabeledExample>& examples) {
  if (model_dir.empty()) throw ConfigError("this system needs --model");
  const ModelDir m = load_model_dir(model_dir);
  const EncodedCorpus corpus =
      encode_corpus(examples, m.vocab, m.binning, m.checkpoint.model.max_len);
  return predict_word_labels(m.checkpoint, corpus);
}

int cmd_predict(const Common& common, const std::string& system, const std::string& model_dir,
                const std::string& data_file, double threshold, std::size_t k) {
  const auto examples = read_examples(data_file);
  std::vector<WordPrediction> preds;
  const auto conf = confidences_of(examples);
  if (system == "tagger") {
    preds = tagger_predictions(model_dir, examples);
  } else if (system == "co") {
    preds = as_predictions(examples, co_detect_all(conf, threshold));
  } else if (system == "and" || system == "or") {
    preds = tagger_predictions(model_dir, examples);
    const auto co = co_detect_all(conf, threshold);
    for (std::size_t i = 0; i < preds.size(); ++i) {
      preds[i].labels = system == "and" ? combine_and(preds[i].labels, co[i])
                                        : combine_or(preds[i].labels, co[i]);
    }
  } else if (system == "mlm") {
    if (model_dir.empty()) throw ConfigError("mlm needs --model");
    const ModelDir m = load_model_dir(model_dir);
    const EncodedCorpus corpus =
        encode_corpus(examples, m.vocab, m.binning, m.checkpoint.model.max_len);
    check_compatible(m.checkpoint, corpus);
    preds = as_predictions(examples,
                           mlm_detect(m.checkpoint.params, m.checkpoint.model, corpus, k));
  } else {
    throw ConfigError(fmt::format("unknown system '{}'", system));
  }
  write_predictions(fs::path(common.out) / "predictions.jsonl", preds);
  echo_config(common, "predict",
              Json{{"system", system}, {"model", model_dir}, {"data", data_file},
                   {"threshold", threshold}, {"k", k}});
  return 0;
}

int cmd_tune(const Common& common, const std::string& system, const std::string& model_dir,
             const std::string& dev_file) {
  const auto dev = read_examples(dev_file);
  const auto gold = gold_labels(dev);
  const auto conf = confidences_of(dev);
  TuningCurve curve;
  if (system == "co") {
    const auto grid = threshold_grid();
    curve = tune_threshold(grid, [&](double t) { return co_detect_all(conf, t); }, gold);
  } else if (system == "and" || system == "or") {
    const auto tagger = prediction_labels(tagger_predictions(model_dir, dev));
    const auto grid = threshold_grid();
    curve = tune_threshold(
        grid,
        [&](double t) {
          auto co = co_detect_all(conf, t);
          for (std::size_t i = 0; i < co.size(); ++i) {
            co[i] = system == "and" ? combine_and(tagger[i], co[i]) : combine_or(tagger[i], co[i]);
          }
          return co;
        },
        gold);
  } else if (system == "mlm") {
    if (model_dir.empty()) throw ConfigError("mlm needs --model");
    const ModelDir m = load_model_dir(model_dir);
    const EncodedCorpus corpus =
        encode_corpus(dev, m.vocab, m.binning, m.checkpoint.model.max_len);
    check_compatible(m.checkpoint, corpus);
    const MlmRanks ranks = mlm_word_ranks(m.checkpoint.params, m.checkpoint.model, corpus);
    const auto grid = k_grid(m.checkpoint.model.vocab_size);
    curve = tune_threshold(
        grid,
        [&](double kk) { return mlm_detect_from_ranks(ranks, static_cast<std::size_t>(kk)); },
        gold);
  } else {
    throw ConfigError(fmt::format("unknown tunable system '{}'", system));
  }
  const fs::path out(common.out);
  export_curve(curve, out / "curve.csv");
  write_json(out / "tuned.json",
             Json{{"system", system}, {"selected", curve.selected()},
                  {"dev_f1", curve.f1[curve.selected_index]}});
  echo_config(common, "tune", Json{{"system", system}, {"model", model_dir}, {"data", dev_file}});
  return 0;
}

std::vector<LabelSequence> aligned_predictions(const std::vector<WordPrediction>& preds,
                                               const std::vector<LabeledExample>& gold) {
  if (preds.size() != gold.size()) {
    throw DataError(fmt::format("{} predictions for {} gold records", preds.size(), gold.size()));
  }
  std::vector<LabelSequence> out;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i].id != gold[i].id) {
      throw DataError(fmt::format("prediction {} does not match gold record {}", preds[i].id,
                                  gold[i].id));
    }
    out.push_back(preds[i].labels);
  }
  return out;
}

Json eval_json(const std::vector<LabelSequence>& pred, const std::vector<LabeledExample>& gold) {
  const auto g = gold_labels(gold);
  return Json{{"word", to_json(word_prf(pred, g))}, {"span", to_json(span_prf(pred, g))}};
}

double corpus_brier(const std::vector<LabeledExample>& examples) {
  std::vector<double> c;
  LabelSequence y;
  for (const auto& ex : examples) {
    c.insert(c.end(), ex.confidences.begin(), ex.confidences.end());
    y.insert(y.end(), ex.labels.begin(), ex.labels.end());
  }
  return brier(c, y);
}

int cmd_evaluate(const Common& common, const std::string& pred_file, const std::string& gold_file,
                 const std::string& baseline_file) {
  RunConfig c = load_run_config(common);
  if (common.seed) c.significance_seed = *common.seed;
  const auto gold = read_examples(gold_file);
  const auto pred = aligned_predictions(read_predictions(pred_file), gold);
  Json report = eval_json(pred, gold);
  report["brier"] = corpus_brier(gold);
  if (!baseline_file.empty()) {
    const auto base = aligned_predictions(read_predictions(baseline_file), gold);
    const auto g = gold_labels(gold);
    const double f1_pred = word_prf(pred, g).f1;
    const double f1_base = word_prf(base, g).f1;
    report["baseline"] = eval_json(base, gold);
    report["f1_delta_pct"] = f1_base > 0.0 ? Json(f1_delta_pct(f1_pred, f1_base)) : Json(nullptr);
    report["significance"] = to_json(significance_test(flatten(base), flatten(pred), flatten(g),
                                                       c.significance_subsets,
                                                       c.significance_seed));
  }
  write_json(fs::path(common.out) / "eval.json", report);
  echo_config(common, "evaluate",
              Json{{"pred", pred_file}, {"gold", gold_file}, {"baseline", baseline_file},
                   {"significance", {{"subsets", c.significance_subsets},
                                     {"seed", c.significance_seed}}}});
  return 0;
}

// Trains the taggers and compares every system on the test split.
int cmd_report(const Common& common, const std::string& data_dir, bool with_mlm) {
  RunConfig c = load_run_config(common);
  if (common.seed) c.train.seed = *common.seed;
  const CorpusBundle bundle = read_bundle(data_dir);
  const PreparedData data = prepare(bundle, c.encoding);
  const auto test_gold = gold_labels(bundle.test);
  const auto dev_gold = gold_labels(bundle.dev);

  Json systems = Json::object();
  auto record = [&](const std::string& name, const std::vector<LabelSequence>& pred) {
    systems[name] = eval_json(pred, bundle.test);
  };

  std::vector<LabelSequence> text_only_dev, text_only_test, redace_test;
  for (ModelMode mode : {ModelMode::kTextOnly, ModelMode::kRedAce, ModelMode::kConcatScore}) {
    const ModelConfig mcfg = model_for(data, c.model, mode);
    const TrainedTagger t = train_tagger(data, mcfg, c.train);
    auto test_pred = prediction_labels(predict_word_labels(t.checkpoint, data.test));
    record(std::string(to_string(mode)), test_pred);
    systems[std::string(to_string(mode))]["train_report"] = to_json(t.report);
    if (mode == ModelMode::kTextOnly) {
      text_only_dev = prediction_labels(predict_word_labels(t.checkpoint, data.dev));
      text_only_test = test_pred;
    } else if (mode == ModelMode::kRedAce) {
      redace_test = test_pred;
    }
  }

  const TunedBaseline co = tune_co(bundle);
  record("co", co.test_pred);
  systems["co"]["threshold"] = co.curve.selected();

  const auto dev_conf = confidences_of(bundle.dev);
  const auto test_conf = confidences_of(bundle.test);
  for (const std::string name : {"and", "or"}) {
    auto combine = [&](const std::vector<LabelSequence>& tagger,
                       const std::vector<LabelSequence>& conf_pred) {
      std::vector<LabelSequence> out;
      for (std::size_t i = 0; i < tagger.size(); ++i) {
        out.push_back(name == "and" ? combine_and(tagger[i], conf_pred[i])
                                    : combine_or(tagger[i], conf_pred[i]));
      }
      return out;
    };
    const auto grid = threshold_grid();
    const TuningCurve curve = tune_threshold(
        grid, [&](double t) { return combine(text_only_dev, co_detect_all(dev_conf, t)); },
        dev_gold);
    record(name, combine(text_only_test, co_detect_all(test_conf, curve.selected())));
    systems[name]["threshold"] = curve.selected();
  }

  if (with_mlm) {
    const ModelConfig mcfg = model_for(data, c.model, ModelMode::kMlm);
    const TrainResult mlm = train_mlm(data.train, mcfg, c.train);
    const MlmRanks dev_ranks = mlm_word_ranks(mlm.params, mcfg, data.dev);
    const auto grid = k_grid(mcfg.vocab_size);
    const TuningCurve curve = tune_threshold(
        grid,
        [&](double k) { return mlm_detect_from_ranks(dev_ranks, static_cast<std::size_t>(k)); },
        dev_gold);
    const auto k = static_cast<std::size_t>(curve.selected());
    record("mlm", mlm_detect_from_ranks(mlm_word_ranks(mlm.params, mcfg, data.test), k));
    systems["mlm"]["k"] = k;
  }

  Json report{{"systems", systems}, {"test_brier", corpus_brier(bundle.test)},
              {"test_stats", to_json(dataset_stats(bundle.test))}};
  const double f1_text = word_prf(text_only_test, test_gold).f1;
  const double f1_red = word_prf(redace_test, test_gold).f1;
  report["f1_delta_pct"] = f1_text > 0.0 ? Json(f1_delta_pct(f1_red, f1_text)) : Json(nullptr);
  report["significance"] =
      to_json(significance_test(flatten(text_only_test), flatten(redace_test), flatten(test_gold),
                                c.significance_subsets, c.significance_seed));
  write_json(fs::path(common.out) / "report.json", report);
  Json resolved = to_json(c);
  resolved["data"] = data_dir;
  resolved["with_mlm"] = with_mlm;
  echo_config(common, "report", resolved);
  return 0;
}

int cmd_ablate(const Common& common, const std::string& data_dir,
               const std::vector<std::size_t>& bins) {
  RunConfig c = load_run_config(common);
  if (common.seed) c.train.seed = *common.seed;
  const CorpusBundle bundle = read_bundle(data_dir);
  const std::vector<BinningAlgorithm> algs{BinningAlgorithm::kEqualWidth,
                                           BinningAlgorithm::kQuantile};
  const auto rows = ablate_binning(bundle, c.encoding, bins, algs, c.model, c.train);
  Json out = Json::array();
  for (const auto& r : rows) {
    out.push_back({{"algorithm", to_string(r.algorithm)}, {"num_bins", r.num_bins},
                   {"dev", to_json(r.dev)}, {"test", to_json(r.test)},
                   {"selected_epoch", r.report.selected_epoch}});
  }
  write_json(fs::path(common.out) / "ablation.json", out);
  Json resolved = to_json(c);
  resolved["data"] = data_dir;
  resolved["bins"] = bins;
  echo_config(common, "ablate-binning", resolved);
  return 0;
}

int exit_code(ExitCode c) { return static_cast<int>(c); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ASR error detection with confidence embeddings"};
  app.require_subcommand(1);

  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config_path, "JSON run config");
    sub->add_option("--seed", common.seed, "Seed override");
    sub->add_option("--out", common.out, "Output directory");
  };

  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic corpus");
  add_common(simulate);

  std::string hyp_file, ref_file, jsonl_file;
  bool strip_punct = false;
  auto* label = app.add_subcommand("label", "Label hypotheses against references");
  add_common(label);
  label->add_option("--hyp", hyp_file, "Hypothesis text, one utterance per line");
  label->add_option("--ref", ref_file, "Reference text, line-aligned with --hyp");
  label->add_option("--jsonl", jsonl_file, "JSONL records with hyp_words and ref_words");
  label->add_flag("--strip-punctuation", strip_punct);

  std::string data_dir, mode;
  auto* train_cmd = app.add_subcommand("train", "Train a tagger or masked LM");
  add_common(train_cmd);
  train_cmd->add_option("--data", data_dir, "Directory with train/dev JSONL")->required();
  train_cmd->add_option("--mode", mode, "text_only, redace, concat_score or mlm");

  std::string system = "tagger", model_dir, data_file, baseline_file;
  double threshold = 0.5;
  std::size_t k = 10;
  auto* predict = app.add_subcommand("predict", "Write word predictions");
  add_common(predict);
  predict->add_option("--system", system, "tagger, co, and, or or mlm");
  predict->add_option("--model", model_dir, "Model directory from train");
  predict->add_option("--data", data_file, "JSONL records")->required();
  predict->add_option("--threshold", threshold, "Confidence threshold for co/and/or");
  predict->add_option("--k", k, "Top-k for mlm");

  auto* tune = app.add_subcommand("tune", "Tune a threshold or k on dev F1");
  add_common(tune);
  tune->add_option("--system", system, "co, and, or or mlm")->required();
  tune->add_option("--model", model_dir, "Model directory for and/or/mlm");
  tune->add_option("--data", data_file, "Dev JSONL")->required();

  std::string pred_file, gold_file;
  auto* evaluate = app.add_subcommand("evaluate", "Score predictions against gold");
  add_common(evaluate);
  evaluate->add_option("--pred", pred_file, "Prediction JSONL")->required();
  evaluate->add_option("--gold", gold_file, "Gold JSONL")->required();
  evaluate->add_option("--baseline", baseline_file, "Second prediction file for significance");

  bool with_mlm = false;
  auto* report = app.add_subcommand("report", "Train and compare every system");
  add_common(report);
  report->add_option("--data", data_dir, "Directory with train/dev/test JSONL")->required();
  report->add_flag("--with-mlm", with_mlm, "Also train and tune the masked-LM baseline");

  std::vector<std::size_t> bins{10, 100, 1000};
  auto* ablate = app.add_subcommand("ablate-binning", "Compare binning algorithms and sizes");
  add_common(ablate);
  ablate->add_option("--data", data_dir, "Directory with train/dev/test JSONL")->required();
  ablate->add_option("--bins", bins, "Bin counts")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : exit_code(ExitCode::kConfig);
  }

  try {
    fs::create_directories(common.out);
    if (*simulate) return cmd_simulate(common);
    if (*label) return cmd_label(common, hyp_file, ref_file, jsonl_file, strip_punct);
    if (*train_cmd) return cmd_train(common, data_dir, mode);
    if (*predict) return cmd_predict(common, system, model_dir, data_file, threshold, k);
    if (*tune) return cmd_tune(common, system, model_dir, data_file);
    if (*evaluate) return cmd_evaluate(common, pred_file, gold_file, baseline_file);
    if (*report) return cmd_report(common, data_dir, with_mlm);
    if (*ablate) return cmd_ablate(common, data_dir, bins);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return exit_code(ExitCode::kConfig);
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return exit_code(ExitCode::kData);
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return exit_code(ExitCode::kNumerical);
  } catch (const fs::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return exit_code(ExitCode::kData);
  }
  return 0;
}
