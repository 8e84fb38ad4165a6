#include "redace/pipeline.hpp"

#include "redace/baselines.hpp"
#include "redace/errors.hpp"

namespace redace {

BinningConfig fit_binning(std::span<const LabeledExample> train, BinningAlgorithm algorithm,
                          std::size_t num_bins) {
  if (algorithm == BinningAlgorithm::kEqualWidth) return equal_width_bins(num_bins);
  std::vector<double> scores;
  for (const auto& ex : train) scores.insert(scores.end(), ex.confidences.begin(), ex.confidences.end());
  return fit_quantile_bins(scores, num_bins);
}

PreparedData prepare(const CorpusBundle& data, const EncodingConfig& cfg) {
  std::vector<WordSequence> text;
  text.reserve(data.train.size());
  for (const auto& ex : data.train) text.push_back(ex.hyp);
  PreparedData out;
  out.vocab = build_vocab(text, cfg.vocab_target, cfg.min_word_count);
  out.binning = fit_binning(data.train, cfg.binning, cfg.num_bins);
  out.train = encode_corpus(data.train, out.vocab, out.binning, cfg.max_len);
  out.dev = encode_corpus(data.dev, out.vocab, out.binning, cfg.max_len);
  out.test = encode_corpus(data.test, out.vocab, out.binning, cfg.max_len);
  return out;
}

ModelConfig model_for(const PreparedData& data, ModelConfig base, ModelMode mode) {
  base.mode = mode;
  base.vocab_size = data.vocab.size();
  base.num_bins = data.binning.num_bins;
  if (!data.train.examples.empty()) base.max_len = data.train.examples.front().token_ids.size();
  validate(base);
  return base;
}

TrainedTagger train_tagger(const PreparedData& data, const ModelConfig& model,
                           const TrainConfig& train_cfg) {
  TrainResult r = train(data.train, data.dev, model, train_cfg);
  TrainedTagger out;
  out.checkpoint.model = model;
  out.checkpoint.params = std::move(r.params);
  out.checkpoint.vocab_hash = data.vocab.hash();
  out.checkpoint.binning_hash = data.binning.hash();
  out.report = std::move(r.report);
  return out;
}

std::vector<LabelSequence> gold_labels(std::span<const LabeledExample> examples) {
  std::vector<LabelSequence> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) out.push_back(ex.labels);
  return out;
}

std::vector<LabelSequence> prediction_labels(const std::vector<WordPrediction>& preds) {
  std::vector<LabelSequence> out;
  out.reserve(preds.size());
  for (const auto& p : preds) out.push_back(p.labels);
  return out;
}

std::vector<std::vector<double>> confidences_of(std::span<const LabeledExample> examples) {
  std::vector<std::vector<double>> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) out.push_back(ex.confidences);
  return out;
}

std::vector<LabelSequence> co_detect_all(const std::vector<std::vector<double>>& conf,
                                         double threshold) {
  std::vector<LabelSequence> out;
  out.reserve(conf.size());
  for (const auto& c : conf) out.push_back(co_detect(c, threshold));
  return out;
}

TunedBaseline tune_co(const CorpusBundle& data) {
  const auto dev_conf = confidences_of(data.dev);
  const auto dev_gold = gold_labels(data.dev);
  const auto grid = threshold_grid();
  TunedBaseline out;
  out.curve = tune_threshold(
      grid, [&](double t) { return co_detect_all(dev_conf, t); }, dev_gold);
  out.test_pred = co_detect_all(confidences_of(data.test), out.curve.selected());
  return out;
}

std::vector<AblationRow> ablate_binning(const CorpusBundle& data, const EncodingConfig& base,
                                        std::span<const std::size_t> bin_counts,
                                        std::span<const BinningAlgorithm> algorithms,
                                        const ModelConfig& model, const TrainConfig& train_cfg) {
  std::vector<AblationRow> rows;
  const auto dev_gold = gold_labels(data.dev);
  const auto test_gold = gold_labels(data.test);
  for (BinningAlgorithm alg : algorithms) {
    for (std::size_t bins : bin_counts) {
      EncodingConfig enc = base;
      enc.binning = alg;
      enc.num_bins = bins;
      const PreparedData prepared = prepare(data, enc);
      const ModelConfig mcfg = model_for(prepared, model, ModelMode::kRedAce);
      TrainedTagger tagger = train_tagger(prepared, mcfg, train_cfg);
      AblationRow row;
      row.algorithm = alg;
      row.num_bins = bins;
      row.report = tagger.report;
      row.dev = word_prf(prediction_labels(predict_word_labels(tagger.checkpoint, prepared.dev)),
                         dev_gold);
      row.test = word_prf(
          prediction_labels(predict_word_labels(tagger.checkpoint, prepared.test)), test_gold);
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

}  // namespace redace
