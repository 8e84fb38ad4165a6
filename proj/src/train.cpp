#include "redace/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "redace/errors.hpp"
#include "redace/random.hpp"

namespace redace {

namespace {

void zero(TaggerParameters& p) {
  for_each_tensor(p, [](const std::string&, Mat& m, bool) { m.setZero(); });
}

std::vector<const TokenizedExample*> gather(const EncodedCorpus& corpus,
                                            const std::vector<std::size_t>& order,
                                            std::size_t begin, std::size_t end) {
  std::vector<const TokenizedExample*> out;
  out.reserve(end - begin);
  for (std::size_t i = begin; i < end; ++i) out.push_back(&corpus.examples[order[i]]);
  return out;
}

void check_loss(double loss, std::size_t epoch, std::size_t step) {
  if (!std::isfinite(loss)) {
    throw NumericalError(
        fmt::format("training diverged: non-finite loss at epoch {} step {}", epoch, step));
  }
}

}  // namespace

void validate(const TrainConfig& cfg) {
  if (cfg.batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (!(cfg.learning_rate >= 0.0)) throw ConfigError("learning_rate must be nonnegative");
  if (!(cfg.weight_decay >= 0.0)) throw ConfigError("weight_decay must be nonnegative");
  if (!(cfg.adam_beta1 >= 0.0 && cfg.adam_beta1 < 1.0) ||
      !(cfg.adam_beta2 >= 0.0 && cfg.adam_beta2 < 1.0)) {
    throw ConfigError("adam betas must lie in [0,1)");
  }
  if (!(cfg.adam_eps > 0.0)) throw ConfigError("adam_eps must be positive");
  if (!(cfg.mlm_mask_prob > 0.0 && cfg.mlm_mask_prob <= 1.0)) {
    throw ConfigError("mlm_mask_prob must lie in (0,1]");
  }
}

TrainConfig full_scale_train_profile() {
  TrainConfig cfg;
  cfg.batch_size = 512;
  cfg.learning_rate = 3e-5;
  cfg.weight_decay = 0.01;
  cfg.max_epochs = 500;
  return cfg;
}

AdamW::AdamW(const TaggerParameters& shape_like, const TrainConfig& cfg)
    : cfg_(cfg), m_(shape_like), v_(shape_like) {
  zero(m_);
  zero(v_);
}

void AdamW::step(TaggerParameters& params, const TaggerParameters& grads) {
  ++t_;
  const double b1 = cfg_.adam_beta1;
  const double b2 = cfg_.adam_beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  const double lr = cfg_.learning_rate;
  const double wd = cfg_.weight_decay;

  std::vector<Mat*> ms, vs;
  std::vector<const Mat*> gs;
  for_each_tensor(m_, [&](const std::string&, Mat& m, bool) { ms.push_back(&m); });
  for_each_tensor(v_, [&](const std::string&, Mat& m, bool) { vs.push_back(&m); });
  for_each_tensor(grads, [&](const std::string&, const Mat& m, bool) { gs.push_back(&m); });
  std::size_t i = 0;
  for_each_tensor(params, [&](const std::string&, Mat& p, bool decays) {
    Mat& m = *ms[i];
    Mat& v = *vs[i];
    const Mat& g = *gs[i];
    ++i;
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
    auto update = (m.array() / c1) / ((v.array() / c2).sqrt() + cfg_.adam_eps);
    if (decays && wd > 0.0) {
      p.array() -= lr * (update + wd * p.array());
    } else {
      p.array() -= lr * update;
    }
  });
}

double tagging_accuracy(const TaggerParameters& params, const ModelConfig& cfg,
                        const EncodedCorpus& corpus) {
  std::size_t correct = 0;
  std::size_t total = 0;
  constexpr std::size_t kBatch = 64;
  for (std::size_t begin = 0; begin < corpus.examples.size(); begin += kBatch) {
    std::size_t end = std::min(begin + kBatch, corpus.examples.size());
    std::vector<const TokenizedExample*> ptrs;
    for (std::size_t i = begin; i < end; ++i) ptrs.push_back(&corpus.examples[i]);
    const ForwardTrace tr = forward(pack(ptrs), params, cfg);
    const auto targets = tag_targets(ptrs);
    for (Eigen::Index r = 0; r < tr.logits.rows(); ++r) {
      int pred = tr.logits(r, 1) > tr.logits(r, 0) ? 1 : 0;
      correct += pred == targets[static_cast<std::size_t>(r)] ? 1 : 0;
      ++total;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
}

TrainResult train(const EncodedCorpus& train_set, const EncodedCorpus& dev_set,
                  const ModelConfig& model_cfg, const TrainConfig& train_cfg) {
  validate(model_cfg);
  validate(train_cfg);
  if (model_cfg.mode == ModelMode::kMlm) throw ConfigError("use train_mlm for mlm mode");
  if (train_set.examples.empty()) throw ConfigError("training split is empty");
  if (dev_set.examples.empty()) throw ConfigError("dev split is empty");
  if (train_set.vocab_hash != dev_set.vocab_hash ||
      train_set.binning_hash != dev_set.binning_hash) {
    throw ConfigError(fmt::format("train/dev encodings differ (vocab {} vs {}, binning {} vs {})",
                                  train_set.vocab_hash, dev_set.vocab_hash,
                                  train_set.binning_hash, dev_set.binning_hash));
  }

  TrainResult result{init_params(model_cfg, train_cfg.seed), {}};
  TaggerParameters params = result.params;
  TaggerParameters grads = zero_parameters(model_cfg);
  AdamW opt(params, train_cfg);
  Rng order_rng(mix_seed(train_cfg.seed, 200));
  Rng dropout_rng(mix_seed(train_cfg.seed, 201));

  std::vector<std::size_t> order(train_set.examples.size());
  std::iota(order.begin(), order.end(), 0);
  double best = -1.0;
  std::size_t step = 0;
  auto evaluate = [&](std::size_t epoch) {
    double acc = tagging_accuracy(params, model_cfg, dev_set);
    result.report.evaluations.push_back({epoch, step, acc});
    if (acc > best) {
      best = acc;
      result.params = params;
      result.report.selected_epoch = epoch;
      result.report.selected_step = step;
      result.report.selected_dev_accuracy = acc;
    }
  };

  for (std::size_t epoch = 1; epoch <= train_cfg.max_epochs; ++epoch) {
    order_rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += train_cfg.batch_size) {
      const std::size_t end = std::min(begin + train_cfg.batch_size, order.size());
      const auto batch = gather(train_set, order, begin, end);
      const EncoderInput input = pack(batch);
      const auto targets = tag_targets(batch);
      zero(grads);
      const ForwardTrace tr = forward(input, params, model_cfg, &dropout_rng);
      const LossSum loss = backward(tr, params, model_cfg, targets,
                                    1.0 / static_cast<double>(targets.size()), grads);
      check_loss(loss.sum, epoch, step);
      opt.step(params, grads);
      ++step;
      loss_sum += loss.sum;
      loss_count += loss.count;
      if (train_cfg.eval_every > 0 && step % train_cfg.eval_every == 0) evaluate(epoch);
    }
    result.report.epoch_train_loss.push_back(loss_sum / static_cast<double>(loss_count));
    if (train_cfg.eval_every == 0) evaluate(epoch);
  }
  if (result.report.evaluations.empty()) evaluate(0);
  return result;
}

TrainResult train_mlm(const EncodedCorpus& text, const ModelConfig& model_cfg,
                      const TrainConfig& train_cfg) {
  validate(model_cfg);
  validate(train_cfg);
  if (model_cfg.mode != ModelMode::kMlm) throw ConfigError("train_mlm needs mlm mode");
  if (text.examples.empty()) throw ConfigError("mlm text corpus is empty");

  TrainResult result{init_params(model_cfg, train_cfg.seed), {}};
  TaggerParameters& params = result.params;
  TaggerParameters grads = zero_parameters(model_cfg);
  AdamW opt(params, train_cfg);
  Rng order_rng(mix_seed(train_cfg.seed, 300));
  Rng mask_rng(mix_seed(train_cfg.seed, 301));
  Rng dropout_rng(mix_seed(train_cfg.seed, 302));
  const std::size_t vocab = model_cfg.vocab_size;

  std::vector<std::size_t> order(text.examples.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t step = 0;
  for (std::size_t epoch = 1; epoch <= train_cfg.max_epochs; ++epoch) {
    order_rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += train_cfg.batch_size) {
      const std::size_t end = std::min(begin + train_cfg.batch_size, order.size());
      const auto batch = gather(text, order, begin, end);
      EncoderInput input = pack(batch);
      std::vector<int> targets(input.rows(), -1);
      for (std::size_t s = 0; s < input.num_sequences(); ++s) {
        // Content tokens sit strictly between CLS and SEP.
        const std::size_t first = input.starts[s] + 1;
        const std::size_t last = input.starts[s + 1] - 1;
        if (first >= last) continue;
        std::vector<std::size_t> picked;
        for (std::size_t t = first; t < last; ++t) {
          if (mask_rng.bernoulli(train_cfg.mlm_mask_prob)) picked.push_back(t);
        }
        if (picked.empty()) picked.push_back(first + mask_rng.below(last - first));
        for (std::size_t t : picked) {
          targets[t] = input.token_ids[t];
          double u = mask_rng.uniform();
          if (u < 0.8) {
            input.token_ids[t] = kMask;
          } else if (u < 0.9) {
            input.token_ids[t] =
                static_cast<int>(kNumSpecial + mask_rng.below(vocab - kNumSpecial));
          }
        }
      }
      const auto n_targets = static_cast<double>(
          std::count_if(targets.begin(), targets.end(), [](int t) { return t >= 0; }));
      if (n_targets == 0) continue;
      zero(grads);
      const ForwardTrace tr = forward(input, params, model_cfg, &dropout_rng);
      const LossSum loss = backward(tr, params, model_cfg, targets, 1.0 / n_targets, grads);
      check_loss(loss.sum, epoch, step);
      opt.step(params, grads);
      ++step;
      loss_sum += loss.sum;
      loss_count += loss.count;
    }
    result.report.epoch_train_loss.push_back(
        loss_count == 0 ? 0.0 : loss_sum / static_cast<double>(loss_count));
  }
  result.report.selected_epoch = train_cfg.max_epochs;
  result.report.selected_step = step;
  return result;
}

void check_compatible(const Checkpoint& ckpt, const EncodedCorpus& corpus) {
  if (ckpt.vocab_hash != corpus.vocab_hash) {
    throw ConfigError(fmt::format("vocabulary mismatch: checkpoint {} vs data {}",
                                  ckpt.vocab_hash, corpus.vocab_hash));
  }
  if (ckpt.binning_hash != corpus.binning_hash) {
    throw ConfigError(fmt::format("binning mismatch: checkpoint {} vs data {}",
                                  ckpt.binning_hash, corpus.binning_hash));
  }
}

std::vector<WordPrediction> predict_word_labels(const TaggerParameters& params,
                                                const ModelConfig& cfg,
                                                const EncodedCorpus& corpus,
                                                std::size_t batch_size) {
  if (cfg.mode == ModelMode::kMlm) throw ConfigError("word tagging needs a tagging-mode model");
  if (batch_size < 1) batch_size = 1;
  std::vector<WordPrediction> out;
  out.reserve(corpus.examples.size());
  for (std::size_t begin = 0; begin < corpus.examples.size(); begin += batch_size) {
    const std::size_t end = std::min(begin + batch_size, corpus.examples.size());
    std::vector<const TokenizedExample*> ptrs;
    for (std::size_t i = begin; i < end; ++i) ptrs.push_back(&corpus.examples[i]);
    const EncoderInput input = pack(ptrs);
    const ForwardTrace tr = forward(input, params, cfg);
    for (std::size_t s = 0; s < ptrs.size(); ++s) {
      const TokenizedExample& ex = *ptrs[s];
      WordPrediction wp;
      wp.id = ex.id;
      wp.labels.assign(ex.num_words, Label::kNotError);
      wp.error_prob.assign(ex.num_words, 0.0);
      for (std::size_t w = 0; w < ex.word_to_tokens.size(); ++w) {
        for (std::size_t t = ex.word_to_tokens[w].begin; t < ex.word_to_tokens[w].end; ++t) {
          const auto row = static_cast<Eigen::Index>(input.starts[s] + t);
          const double l0 = tr.logits(row, 0);
          const double l1 = tr.logits(row, 1);
          if (l1 > l0) wp.labels[w] = Label::kError;
          wp.error_prob[w] = std::max(wp.error_prob[w], 1.0 / (1.0 + std::exp(l0 - l1)));
        }
      }
      out.push_back(std::move(wp));
    }
  }
  return out;
}

std::vector<WordPrediction> predict_word_labels(const Checkpoint& ckpt,
                                                const EncodedCorpus& corpus,
                                                std::size_t batch_size) {
  check_compatible(ckpt, corpus);
  return predict_word_labels(ckpt.params, ckpt.model, corpus, batch_size);
}

std::vector<Span> extract_spans(const LabelSequence& labels) {
  std::vector<Span> spans;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!is_error(labels[i])) continue;
    if (i > 0 && is_error(labels[i - 1])) {
      spans.back().end = i;
    } else {
      spans.push_back({i, i});
    }
  }
  return spans;
}

LabelSequence paint_spans(const std::vector<Span>& spans, std::size_t length) {
  LabelSequence labels(length, Label::kNotError);
  for (const Span& s : spans) {
    for (std::size_t i = s.start; i <= s.end && i < length; ++i) labels[i] = Label::kError;
  }
  return labels;
}

}  // namespace redace
