#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "redace/encode.hpp"
#include "redace/random.hpp"

namespace redace {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class ModelMode { kTextOnly, kRedAce, kConcatScore, kMlm };

std::string_view to_string(ModelMode mode);
ModelMode parse_model_mode(std::string_view s);

struct ModelConfig {
  std::size_t num_layers = 2;
  std::size_t num_heads = 4;
  std::size_t hidden = 64;
  std::size_t ffn_dim = 256;
  std::size_t vocab_size = 0;
  std::size_t num_bins = 10;
  std::size_t max_len = kDefaultMaxLen;
  double dropout = 0.1;
  ModelMode mode = ModelMode::kRedAce;

  std::size_t num_classes() const { return mode == ModelMode::kMlm ? vocab_size : 2; }
  bool operator==(const ModelConfig&) const = default;
};

void validate(const ModelConfig& cfg);

struct LayerParams {
  Mat wq, wk, wv, wo;
  Mat bq, bk, bv, bo;
  Mat ln1_gain, ln1_bias;
  Mat w1, b1, w2, b2;
  Mat ln2_gain, ln2_bias;
};

// All weights of the encoder. The same struct holds gradients and optimizer
// moments. Row vectors (biases, layer-norm parameters) are 1×n matrices.
struct TaggerParameters {
  Mat token_embedding;       // vocab_size × H
  Mat position_embedding;    // max_len × H
  Mat segment_embedding;     // 2 × H
  Mat confidence_embedding;  // (B+1) × H; row B is the special-token bin
  Mat emb_ln_gain, emb_ln_bias;
  std::vector<LayerParams> layers;
  Mat tag_weight, tag_bias;  // (H or H+1) × 2; empty in mlm mode
  Mat mlm_weight, mlm_bias;  // H × vocab_size; empty outside mlm mode
};

// Visits every tensor in a fixed order as f(name, tensor, decays), where
// decays is false for biases and layer-norm parameters.
template <typename Params, typename F>
void for_each_tensor(Params& p, F&& f) {
  f("token_embedding", p.token_embedding, true);
  f("position_embedding", p.position_embedding, true);
  f("segment_embedding", p.segment_embedding, true);
  f("confidence_embedding", p.confidence_embedding, true);
  f("emb_ln_gain", p.emb_ln_gain, false);
  f("emb_ln_bias", p.emb_ln_bias, false);
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    auto& L = p.layers[l];
    const std::string pre = "layer" + std::to_string(l) + ".";
    f(pre + "wq", L.wq, true);
    f(pre + "bq", L.bq, false);
    f(pre + "wk", L.wk, true);
    f(pre + "bk", L.bk, false);
    f(pre + "wv", L.wv, true);
    f(pre + "bv", L.bv, false);
    f(pre + "wo", L.wo, true);
    f(pre + "bo", L.bo, false);
    f(pre + "ln1_gain", L.ln1_gain, false);
    f(pre + "ln1_bias", L.ln1_bias, false);
    f(pre + "w1", L.w1, true);
    f(pre + "b1", L.b1, false);
    f(pre + "w2", L.w2, true);
    f(pre + "b2", L.b2, false);
    f(pre + "ln2_gain", L.ln2_gain, false);
    f(pre + "ln2_bias", L.ln2_bias, false);
  }
  if (p.tag_weight.size() > 0) {
    f("tag_weight", p.tag_weight, true);
    f("tag_bias", p.tag_bias, false);
  }
  if (p.mlm_weight.size() > 0) {
    f("mlm_weight", p.mlm_weight, true);
    f("mlm_bias", p.mlm_bias, false);
  }
}

// Shapes only; every entry zero.
TaggerParameters zero_parameters(const ModelConfig& cfg);

inline constexpr double kInitStddev = 0.02;

// Truncated normal (σ = 0.02, resampled outside ±2σ) for embeddings and
// projections, zero biases, unit layer-norm gains.
TaggerParameters init_params(const ModelConfig& cfg, std::uint64_t seed);

// Throws ConfigError naming the first tensor whose shape disagrees with cfg.
void check_shapes(const TaggerParameters& params, const ModelConfig& cfg);

std::size_t num_parameters(const TaggerParameters& params);

// Several sequences packed row-wise; attention never crosses a boundary in
// `starts`. Only the attention_len prefix of each example is packed, so PAD
// positions take no part in the computation.
struct EncoderInput {
  std::vector<int> token_ids;
  std::vector<int> positions;
  std::vector<int> segments;
  std::vector<int> conf_bins;
  std::vector<double> conf_values;
  std::vector<std::size_t> starts{0};

  std::size_t rows() const { return token_ids.size(); }
  std::size_t num_sequences() const { return starts.size() - 1; }
  void append(const TokenizedExample& ex);
};

EncoderInput pack(std::span<const TokenizedExample* const> examples);
EncoderInput pack(const TokenizedExample& example);

// tok + pos + seg, plus M[bin] in redace mode.
Mat embed(const EncoderInput& input, const TaggerParameters& params, const ModelConfig& cfg);

struct LayerNormCache {
  Mat normalized;
  Eigen::VectorXd inv_std;
};

struct LayerCache {
  Mat input;
  Mat q, k, v;
  std::vector<Mat> probs;  // [sequence * num_heads + head]
  Mat context;
  Mat attn_mask;  // dropout mask, empty when inactive
  LayerNormCache ln1;
  Mat h1;
  Mat pre_act;
  Mat act;
  Mat ffn_mask;
  LayerNormCache ln2;
};

struct ForwardTrace {
  EncoderInput input;
  Mat emb_mask;
  LayerNormCache emb_ln;
  std::vector<LayerCache> layers;
  Mat final_hidden;
  Mat head_input;  // final_hidden, with the raw confidence column in concat mode
  Mat logits;      // rows × num_classes
};

// Post-layer-norm encoder with GELU feed-forward. With a dropout generator the
// pass runs in training mode; without one, dropout is off.
ForwardTrace forward(const EncoderInput& input, const TaggerParameters& params,
                     const ModelConfig& cfg, Rng* dropout_rng = nullptr);

struct LossSum {
  double sum = 0.0;
  std::size_t count = 0;
};

// Cross-entropy summed over rows with target ≥ 0 (−1 skips a row).
LossSum cross_entropy(const Mat& logits, std::span<const int> targets);

// Accumulates scale · ∂(summed cross-entropy)/∂θ into grads and returns the
// summed loss. Pass scale = 1/count for the mean token loss.
LossSum backward(const ForwardTrace& trace, const TaggerParameters& params,
                 const ModelConfig& cfg, std::span<const int> targets, double scale,
                 TaggerParameters& grads);

// Per packed row: class index from labels_tok, i.e. every non-PAD position.
std::vector<int> tag_targets(std::span<const TokenizedExample* const> examples);

// Largest rank over the word's tokens when all of them are masked, where a
// token's rank counts vocabulary logits strictly above its own. The word lies
// in the top k exactly when this is below k. nullopt for a word lost to
// truncation.
std::optional<std::size_t> mlm_word_rank(const TokenizedExample& example, std::size_t word_index,
                          const TaggerParameters& params, const ModelConfig& cfg);

// Words lost to truncation count as suggested. Throws DataError when
// word_index ≥ example.num_words.
bool mlm_mask_and_score(const TokenizedExample& example, std::size_t word_index,
                        const TaggerParameters& params, const ModelConfig& cfg, std::size_t k);

}  // namespace redace
