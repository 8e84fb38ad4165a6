// Finite-difference check of analytic gradients on a tiny encoder.
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "redace/encode.hpp"
#include "redace/model.hpp"
#include "redace/random.hpp"

namespace gradcheck {

using namespace redace;

inline ModelConfig tiny_config(ModelMode mode) {
  ModelConfig c;
  c.num_layers = 1;
  c.num_heads = 2;
  c.hidden = 8;
  c.ffn_dim = 16;
  c.vocab_size = 20;
  c.num_bins = 4;
  c.max_len = 12;
  c.dropout = 0.0;
  c.mode = mode;
  return c;
}

// Random CLS … SEP sequences with random word confidences.
inline std::vector<TokenizedExample> random_examples(const ModelConfig& cfg, std::size_t count,
                                                     std::uint64_t seed) {
  Rng rng(seed);
  std::vector<TokenizedExample> out;
  for (std::size_t n = 0; n < count; ++n) {
    TokenizedExample ex;
    ex.id = std::to_string(n);
    const std::size_t content = 2 + rng.below(cfg.max_len - 3);
    ex.attention_len = content + 2;
    ex.token_ids.assign(cfg.max_len, kPad);
    ex.conf_bins.assign(cfg.max_len, static_cast<int>(cfg.num_bins));
    ex.conf_values.assign(cfg.max_len, 0.0);
    ex.labels_tok.assign(cfg.max_len, Label::kNotError);
    ex.token_ids[0] = kCls;
    ex.token_ids[content + 1] = kSep;
    for (std::size_t t = 1; t <= content; ++t) {
      ex.token_ids[t] = kNumSpecial + static_cast<int>(rng.below(cfg.vocab_size - kNumSpecial));
      ex.conf_values[t] = rng.uniform();
      ex.conf_bins[t] = bin_equal_width(ex.conf_values[t], cfg.num_bins);
      ex.labels_tok[t] = rng.bernoulli(0.3) ? Label::kError : Label::kNotError;
      ex.word_to_tokens.push_back({t, t + 1});
    }
    ex.num_words = content;
    out.push_back(std::move(ex));
  }
  return out;
}

inline std::vector<int> targets_for(const ModelConfig& cfg, const EncoderInput& in,
                                    const std::vector<const TokenizedExample*>& ptrs,
                                    std::uint64_t seed) {
  if (cfg.mode != ModelMode::kMlm) return tag_targets(ptrs);
  // Masked-LM targets at a few random rows; others skipped.
  Rng rng(seed);
  std::vector<int> t(in.rows(), -1);
  for (std::size_t r = 0; r < in.rows(); ++r) {
    if (rng.bernoulli(0.4)) t[r] = static_cast<int>(rng.below(cfg.vocab_size));
  }
  return t;
}

struct TensorResult {
  std::string name;
  double rel_error = 0.0;
  double analytic_norm = 0.0;
};

// Relative error ‖g_a − g_n‖ / (‖g_a‖ + ‖g_n‖) per tensor, or the absolute
// difference when both norms vanish. With use_dropout,
// every evaluation replays the same dropout masks from a fixed seed.
inline std::vector<TensorResult> check(ModelMode mode, bool use_dropout, double h = 1e-5) {
  ModelConfig cfg = tiny_config(mode);
  if (use_dropout) cfg.dropout = 0.2;
  TaggerParameters params = init_params(cfg, 3);
  // Larger weights than the default initialisation make every path matter.
  for_each_tensor(params, [](const std::string&, Mat& m, bool decays) {
    if (decays) m *= 10.0;
  });
  Rng noise(9);
  for_each_tensor(params, [&](const std::string&, Mat& m, bool decays) {
    if (!decays) {
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] += noise.normal(0.0, 0.1);
    }
  });
  const auto examples = random_examples(cfg, 3, 17);
  std::vector<const TokenizedExample*> ptrs;
  for (const auto& e : examples) ptrs.push_back(&e);
  EncoderInput in = pack(ptrs);
  if (mode == ModelMode::kMlm) {
    for (std::size_t r = 1; r < in.rows(); r += 3) in.token_ids[r] = kMask;
  }
  const auto targets = targets_for(cfg, in, ptrs, 23);

  auto run_forward = [&](const TaggerParameters& p) {
    Rng drop(41);
    return forward(in, p, cfg, use_dropout ? &drop : nullptr);
  };
  auto loss = [&]() { return cross_entropy(run_forward(params).logits, targets).sum; };

  TaggerParameters grads = zero_parameters(cfg);
  backward(run_forward(params), params, cfg, targets, 1.0, grads);

  std::vector<Mat*> grad_tensors;
  for_each_tensor(grads, [&](const std::string&, Mat& m, bool) { grad_tensors.push_back(&m); });
  std::vector<TensorResult> results;
  std::size_t idx = 0;
  for_each_tensor(params, [&](const std::string& name, Mat& m, bool) {
    const Mat& g = *grad_tensors[idx++];
    double diff = 0.0, na = 0.0, nn = 0.0;
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      const double numeric = oracle::central_difference(loss, m.data()[i], h);
      const double analytic = g.data()[i];
      diff += (numeric - analytic) * (numeric - analytic);
      na += analytic * analytic;
      nn += numeric * numeric;
    }
    const double denom = std::sqrt(na) + std::sqrt(nn);
    // The key bias shifts every score in a softmax row equally, so its true
    // gradient is zero and only the absolute difference is meaningful.
    const double err = denom < 1e-6 ? std::sqrt(diff) : std::sqrt(diff) / denom;
    results.push_back({name, err, std::sqrt(na)});
  });
  return results;
}

}  // namespace gradcheck
