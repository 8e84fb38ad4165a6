#include "redace/model.hpp"

#include <cmath>

#include <fmt/format.h>

#include "redace/errors.hpp"

namespace redace {

namespace {

constexpr double kLayerNormEps = 1e-12;

Mat truncated_normal(std::size_t rows, std::size_t cols, Rng& rng) {
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    double x;
    do {
      x = rng.normal(0.0, kInitStddev);
    } while (std::abs(x) > 2.0 * kInitStddev);
    m.data()[i] = x;
  }
  return m;
}

Mat layer_norm(const Mat& x, const Mat& gain, const Mat& bias, LayerNormCache& cache) {
  const auto n = static_cast<double>(x.cols());
  cache.normalized.resize(x.rows(), x.cols());
  cache.inv_std.resize(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    double mean = x.row(r).sum() / n;
    double var = (x.row(r).array() - mean).square().sum() / n;
    double inv = 1.0 / std::sqrt(var + kLayerNormEps);
    cache.inv_std(r) = inv;
    cache.normalized.row(r) = (x.row(r).array() - mean) * inv;
  }
  Mat y = cache.normalized.array().rowwise() * gain.row(0).array();
  y.rowwise() += bias.row(0);
  return y;
}

// Returns ∂L/∂x and accumulates the gain/bias gradients.
Mat layer_norm_backward(const Mat& dy, const Mat& gain, const LayerNormCache& cache,
                        Mat& dgain, Mat& dbias) {
  const Mat& xhat = cache.normalized;
  dgain.row(0) += (dy.array() * xhat.array()).colwise().sum().matrix();
  dbias.row(0) += dy.colwise().sum();
  Mat dxhat = dy.array().rowwise() * gain.row(0).array();
  const auto n = static_cast<double>(dy.cols());
  Mat dx(dy.rows(), dy.cols());
  for (Eigen::Index r = 0; r < dy.rows(); ++r) {
    double mean_d = dxhat.row(r).sum() / n;
    double mean_dx = dxhat.row(r).dot(xhat.row(r)) / n;
    dx.row(r) = cache.inv_std(r) *
                (dxhat.row(r).array() - mean_d - xhat.row(r).array() * mean_dx).matrix();
  }
  return dx;
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

double gelu_grad(double x) {
  constexpr double kInvSqrt2Pi = 0.3989422804014327;
  double cdf = 0.5 * (1.0 + std::erf(x / std::sqrt(2.0)));
  return cdf + x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

Mat dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, Rng& rng) {
  Mat m(rows, cols);
  const double keep = 1.0 / (1.0 - p);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform() < p ? 0.0 : keep;
  return m;
}

Mat affine(const Mat& x, const Mat& w, const Mat& b) {
  Mat y(x.rows(), w.cols());
  y.noalias() = x * w;
  y.rowwise() += b.row(0);
  return y;
}

void softmax_rows(Mat& s) {
  for (Eigen::Index r = 0; r < s.rows(); ++r) {
    double mx = s.row(r).maxCoeff();
    s.row(r) = (s.row(r).array() - mx).exp().matrix();
    s.row(r) /= s.row(r).sum();
  }
}

void require_finite(const Mat& m, const char* what) {
  if (!m.allFinite()) throw NumericalError(fmt::format("non-finite values in {}", what));
}

bool uses_bins(ModelMode mode) { return mode == ModelMode::kRedAce; }

std::size_t head_inputs(const ModelConfig& cfg) {
  return cfg.mode == ModelMode::kConcatScore ? cfg.hidden + 1 : cfg.hidden;
}

}  // namespace

std::string_view to_string(ModelMode mode) {
  switch (mode) {
    case ModelMode::kTextOnly: return "text_only";
    case ModelMode::kRedAce: return "redace";
    case ModelMode::kConcatScore: return "concat_score";
    case ModelMode::kMlm: return "mlm";
  }
  return "?";
}

ModelMode parse_model_mode(std::string_view s) {
  if (s == "text_only") return ModelMode::kTextOnly;
  if (s == "redace") return ModelMode::kRedAce;
  if (s == "concat_score") return ModelMode::kConcatScore;
  if (s == "mlm") return ModelMode::kMlm;
  throw ConfigError(fmt::format("unknown model mode '{}'", s));
}

void validate(const ModelConfig& cfg) {
  if (cfg.num_layers < 1 || cfg.num_heads < 1 || cfg.hidden < 1 || cfg.ffn_dim < 1) {
    throw ConfigError("layers, heads, hidden and ffn_dim must be positive");
  }
  if (cfg.hidden % cfg.num_heads != 0) {
    throw ConfigError(fmt::format("hidden {} is not divisible by {} heads", cfg.hidden,
                                  cfg.num_heads));
  }
  if (cfg.num_bins < 1) throw ConfigError("num_bins must be at least 1");
  if (cfg.max_len < 3) throw ConfigError("max_len must be at least 3");
  if (cfg.vocab_size <= static_cast<std::size_t>(kNumSpecial)) {
    throw ConfigError("vocab_size must exceed the special tokens");
  }
  if (!(cfg.dropout >= 0.0 && cfg.dropout < 1.0)) throw ConfigError("dropout must be in [0,1)");
}

TaggerParameters zero_parameters(const ModelConfig& cfg) {
  validate(cfg);
  const auto H = static_cast<Eigen::Index>(cfg.hidden);
  const auto F = static_cast<Eigen::Index>(cfg.ffn_dim);
  const auto V = static_cast<Eigen::Index>(cfg.vocab_size);
  TaggerParameters p;
  p.token_embedding = Mat::Zero(V, H);
  p.position_embedding = Mat::Zero(static_cast<Eigen::Index>(cfg.max_len), H);
  p.segment_embedding = Mat::Zero(2, H);
  p.confidence_embedding = Mat::Zero(static_cast<Eigen::Index>(cfg.num_bins) + 1, H);
  p.emb_ln_gain = Mat::Zero(1, H);
  p.emb_ln_bias = Mat::Zero(1, H);
  p.layers.resize(cfg.num_layers);
  for (auto& L : p.layers) {
    L.wq = L.wk = L.wv = L.wo = Mat::Zero(H, H);
    L.bq = L.bk = L.bv = L.bo = Mat::Zero(1, H);
    L.ln1_gain = L.ln1_bias = L.ln2_gain = L.ln2_bias = Mat::Zero(1, H);
    L.w1 = Mat::Zero(H, F);
    L.b1 = Mat::Zero(1, F);
    L.w2 = Mat::Zero(F, H);
    L.b2 = Mat::Zero(1, H);
  }
  if (cfg.mode == ModelMode::kMlm) {
    p.mlm_weight = Mat::Zero(H, V);
    p.mlm_bias = Mat::Zero(1, V);
  } else {
    p.tag_weight = Mat::Zero(static_cast<Eigen::Index>(head_inputs(cfg)), 2);
    p.tag_bias = Mat::Zero(1, 2);
  }
  return p;
}

TaggerParameters init_params(const ModelConfig& cfg, std::uint64_t seed) {
  TaggerParameters p = zero_parameters(cfg);
  Rng rng(mix_seed(seed, 100));
  for_each_tensor(p, [&](const std::string& name, Mat& m, bool decays) {
    if (decays) {
      m = truncated_normal(static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()),
                           rng);
    } else if (name.find("gain") != std::string::npos) {
      m.setOnes();
    }
  });
  return p;
}

void check_shapes(const TaggerParameters& params, const ModelConfig& cfg) {
  const TaggerParameters expected = zero_parameters(cfg);
  if (params.layers.size() != expected.layers.size()) {
    throw ConfigError(fmt::format("checkpoint has {} layers, config expects {}",
                                  params.layers.size(), expected.layers.size()));
  }
  std::vector<std::pair<Eigen::Index, Eigen::Index>> shapes;
  for_each_tensor(expected, [&](const std::string&, const Mat& m, bool) {
    shapes.emplace_back(m.rows(), m.cols());
  });
  std::size_t i = 0;
  bool count_ok = true;
  for_each_tensor(params, [&](const std::string& name, const Mat& m, bool) {
    if (i >= shapes.size()) {
      count_ok = false;
      return;
    }
    if (m.rows() != shapes[i].first || m.cols() != shapes[i].second) {
      throw ConfigError(fmt::format("tensor {} has shape {}x{}, config expects {}x{}", name,
                                    m.rows(), m.cols(), shapes[i].first, shapes[i].second));
    }
    ++i;
  });
  if (!count_ok || i != shapes.size()) throw ConfigError("tensor list does not match config");
}

std::size_t num_parameters(const TaggerParameters& params) {
  std::size_t n = 0;
  for_each_tensor(params, [&](const std::string&, const Mat& m, bool) {
    n += static_cast<std::size_t>(m.size());
  });
  return n;
}

void EncoderInput::append(const TokenizedExample& ex) {
  for (std::size_t t = 0; t < ex.attention_len; ++t) {
    token_ids.push_back(ex.token_ids[t]);
    positions.push_back(static_cast<int>(t));
    segments.push_back(0);
    conf_bins.push_back(ex.conf_bins[t]);
    conf_values.push_back(ex.conf_values[t]);
  }
  starts.push_back(token_ids.size());
}

EncoderInput pack(std::span<const TokenizedExample* const> examples) {
  EncoderInput in;
  for (const auto* ex : examples) in.append(*ex);
  return in;
}

EncoderInput pack(const TokenizedExample& example) {
  EncoderInput in;
  in.append(example);
  return in;
}

Mat embed(const EncoderInput& input, const TaggerParameters& params, const ModelConfig& cfg) {
  const auto rows = static_cast<Eigen::Index>(input.rows());
  Mat e(rows, static_cast<Eigen::Index>(cfg.hidden));
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto i = static_cast<std::size_t>(r);
    const int tok = input.token_ids[i];
    const int pos = input.positions[i];
    const int seg = input.segments[i];
    const int bin = input.conf_bins[i];
    if (tok < 0 || tok >= params.token_embedding.rows()) {
      throw DataError(fmt::format("token id {} out of range", tok));
    }
    if (pos < 0 || pos >= params.position_embedding.rows()) {
      throw DataError(fmt::format("position {} out of range", pos));
    }
    if (seg < 0 || seg >= params.segment_embedding.rows()) {
      throw DataError(fmt::format("segment {} out of range", seg));
    }
    if (bin < 0 || bin >= params.confidence_embedding.rows()) {
      throw DataError(fmt::format("confidence bin {} out of range", bin));
    }
    e.row(r) = params.token_embedding.row(tok) + params.position_embedding.row(pos) +
               params.segment_embedding.row(seg);
    if (uses_bins(cfg.mode)) e.row(r) += params.confidence_embedding.row(bin);
  }
  return e;
}

ForwardTrace forward(const EncoderInput& input, const TaggerParameters& params,
                     const ModelConfig& cfg, Rng* dropout_rng) {
  const bool drop = dropout_rng != nullptr && cfg.dropout > 0.0;
  const auto H = static_cast<Eigen::Index>(cfg.hidden);
  const auto A = static_cast<Eigen::Index>(cfg.num_heads);
  const Eigen::Index dh = H / A;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  ForwardTrace tr;
  tr.input = input;
  Mat h = layer_norm(embed(input, params, cfg), params.emb_ln_gain, params.emb_ln_bias,
                     tr.emb_ln);
  if (drop) {
    tr.emb_mask = dropout_mask(h.rows(), h.cols(), cfg.dropout, *dropout_rng);
    h = h.cwiseProduct(tr.emb_mask);
  }

  tr.layers.resize(params.layers.size());
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const LayerParams& L = params.layers[l];
    LayerCache& c = tr.layers[l];
    c.input = h;
    c.q = affine(h, L.wq, L.bq);
    c.k = affine(h, L.wk, L.bk);
    c.v = affine(h, L.wv, L.bv);
    c.context = Mat::Zero(h.rows(), H);
    c.probs.resize(input.num_sequences() * static_cast<std::size_t>(A));
    for (std::size_t s = 0; s < input.num_sequences(); ++s) {
      const auto begin = static_cast<Eigen::Index>(input.starts[s]);
      const auto len = static_cast<Eigen::Index>(input.starts[s + 1]) - begin;
      for (Eigen::Index a = 0; a < A; ++a) {
        Mat& p = c.probs[s * static_cast<std::size_t>(A) + static_cast<std::size_t>(a)];
        p.noalias() = c.q.block(begin, a * dh, len, dh) *
                      c.k.block(begin, a * dh, len, dh).transpose();
        p *= scale;
        softmax_rows(p);
        c.context.block(begin, a * dh, len, dh).noalias() = p * c.v.block(begin, a * dh, len, dh);
      }
    }
    Mat attn = affine(c.context, L.wo, L.bo);
    if (drop) {
      c.attn_mask = dropout_mask(attn.rows(), attn.cols(), cfg.dropout, *dropout_rng);
      attn = attn.cwiseProduct(c.attn_mask);
    }
    c.h1 = layer_norm(h + attn, L.ln1_gain, L.ln1_bias, c.ln1);
    c.pre_act = affine(c.h1, L.w1, L.b1);
    c.act = c.pre_act.unaryExpr([](double x) { return gelu(x); });
    Mat ffn = affine(c.act, L.w2, L.b2);
    if (drop) {
      c.ffn_mask = dropout_mask(ffn.rows(), ffn.cols(), cfg.dropout, *dropout_rng);
      ffn = ffn.cwiseProduct(c.ffn_mask);
    }
    h = layer_norm(c.h1 + ffn, L.ln2_gain, L.ln2_bias, c.ln2);
  }
  tr.final_hidden = h;
  require_finite(tr.final_hidden, "encoder output");

  if (cfg.mode == ModelMode::kMlm) {
    tr.head_input = h;
    tr.logits = affine(h, params.mlm_weight, params.mlm_bias);
  } else {
    if (cfg.mode == ModelMode::kConcatScore) {
      tr.head_input.resize(h.rows(), H + 1);
      tr.head_input.leftCols(H) = h;
      for (Eigen::Index r = 0; r < h.rows(); ++r) {
        tr.head_input(r, H) = input.conf_values[static_cast<std::size_t>(r)];
      }
    } else {
      tr.head_input = h;
    }
    tr.logits = affine(tr.head_input, params.tag_weight, params.tag_bias);
  }
  require_finite(tr.logits, "logits");
  return tr;
}

LossSum cross_entropy(const Mat& logits, std::span<const int> targets) {
  if (static_cast<std::size_t>(logits.rows()) != targets.size()) {
    throw DataError("target count does not match logit rows");
  }
  LossSum loss;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    int t = targets[static_cast<std::size_t>(r)];
    if (t < 0) continue;
    double mx = logits.row(r).maxCoeff();
    double lse = mx + std::log((logits.row(r).array() - mx).exp().sum());
    loss.sum += lse - logits(r, t);
    ++loss.count;
  }
  return loss;
}

LossSum backward(const ForwardTrace& tr, const TaggerParameters& params,
                 const ModelConfig& cfg, std::span<const int> targets, double scale,
                 TaggerParameters& grads) {
  const LossSum loss = cross_entropy(tr.logits, targets);
  if (!std::isfinite(loss.sum)) throw NumericalError("non-finite loss");

  const auto H = static_cast<Eigen::Index>(cfg.hidden);
  const auto A = static_cast<Eigen::Index>(cfg.num_heads);
  const Eigen::Index dh = H / A;
  const double att_scale = 1.0 / std::sqrt(static_cast<double>(dh));

  // ∂loss/∂logits = scale · (softmax − onehot) on targeted rows.
  Mat dlogits = Mat::Zero(tr.logits.rows(), tr.logits.cols());
  for (Eigen::Index r = 0; r < tr.logits.rows(); ++r) {
    int t = targets[static_cast<std::size_t>(r)];
    if (t < 0) continue;
    double mx = tr.logits.row(r).maxCoeff();
    Eigen::RowVectorXd p = (tr.logits.row(r).array() - mx).exp().matrix();
    p /= p.sum();
    p(t) -= 1.0;
    dlogits.row(r) = scale * p;
  }

  Mat dh_out;
  if (cfg.mode == ModelMode::kMlm) {
    grads.mlm_weight.noalias() += tr.head_input.transpose() * dlogits;
    grads.mlm_bias.row(0) += dlogits.colwise().sum();
    dh_out.noalias() = dlogits * params.mlm_weight.transpose();
  } else {
    grads.tag_weight.noalias() += tr.head_input.transpose() * dlogits;
    grads.tag_bias.row(0) += dlogits.colwise().sum();
    Mat dhead = dlogits * params.tag_weight.transpose();
    dh_out = dhead.leftCols(H);
  }

  for (std::size_t li = params.layers.size(); li-- > 0;) {
    const LayerParams& L = params.layers[li];
    LayerParams& G = grads.layers[li];
    const LayerCache& c = tr.layers[li];

    Mat dr2 = layer_norm_backward(dh_out, L.ln2_gain, c.ln2, G.ln2_gain, G.ln2_bias);
    Mat dffn = c.ffn_mask.size() > 0 ? Mat(dr2.cwiseProduct(c.ffn_mask)) : dr2;
    G.b2.row(0) += dffn.colwise().sum();
    G.w2.noalias() += c.act.transpose() * dffn;
    Mat dact = dffn * L.w2.transpose();
    Mat dpre = dact.cwiseProduct(c.pre_act.unaryExpr([](double x) { return gelu_grad(x); }));
    G.b1.row(0) += dpre.colwise().sum();
    G.w1.noalias() += c.h1.transpose() * dpre;
    Mat dh1 = dr2;
    dh1.noalias() += dpre * L.w1.transpose();

    Mat dr1 = layer_norm_backward(dh1, L.ln1_gain, c.ln1, G.ln1_gain, G.ln1_bias);
    Mat dattn = c.attn_mask.size() > 0 ? Mat(dr1.cwiseProduct(c.attn_mask)) : dr1;
    G.bo.row(0) += dattn.colwise().sum();
    G.wo.noalias() += c.context.transpose() * dattn;
    Mat dctx = dattn * L.wo.transpose();

    Mat dq = Mat::Zero(c.q.rows(), H);
    Mat dk = Mat::Zero(c.k.rows(), H);
    Mat dv = Mat::Zero(c.v.rows(), H);
    for (std::size_t s = 0; s < tr.input.num_sequences(); ++s) {
      const auto begin = static_cast<Eigen::Index>(tr.input.starts[s]);
      const auto len = static_cast<Eigen::Index>(tr.input.starts[s + 1]) - begin;
      for (Eigen::Index a = 0; a < A; ++a) {
        const Mat& p = c.probs[s * static_cast<std::size_t>(A) + static_cast<std::size_t>(a)];
        auto dctx_h = dctx.block(begin, a * dh, len, dh);
        dv.block(begin, a * dh, len, dh).noalias() = p.transpose() * dctx_h;
        Mat dp = dctx_h * c.v.block(begin, a * dh, len, dh).transpose();
        // Softmax Jacobian, row-wise: ds = p ∘ (dp − Σ dp∘p).
        Eigen::VectorXd inner = (dp.array() * p.array()).rowwise().sum();
        Mat ds = (p.array() * (dp.array().colwise() - inner.array())).matrix();
        ds *= att_scale;
        dq.block(begin, a * dh, len, dh).noalias() = ds * c.k.block(begin, a * dh, len, dh);
        dk.block(begin, a * dh, len, dh).noalias() =
            ds.transpose() * c.q.block(begin, a * dh, len, dh);
      }
    }
    G.bq.row(0) += dq.colwise().sum();
    G.bk.row(0) += dk.colwise().sum();
    G.bv.row(0) += dv.colwise().sum();
    G.wq.noalias() += c.input.transpose() * dq;
    G.wk.noalias() += c.input.transpose() * dk;
    G.wv.noalias() += c.input.transpose() * dv;
    Mat dx = dr1;
    dx.noalias() += dq * L.wq.transpose();
    dx.noalias() += dk * L.wk.transpose();
    dx.noalias() += dv * L.wv.transpose();
    dh_out = std::move(dx);
  }

  if (tr.emb_mask.size() > 0) dh_out = dh_out.cwiseProduct(tr.emb_mask);
  Mat de = layer_norm_backward(dh_out, params.emb_ln_gain, tr.emb_ln, grads.emb_ln_gain,
                               grads.emb_ln_bias);
  const bool bins = uses_bins(cfg.mode);
  for (Eigen::Index r = 0; r < de.rows(); ++r) {
    const auto i = static_cast<std::size_t>(r);
    grads.token_embedding.row(tr.input.token_ids[i]) += de.row(r);
    grads.position_embedding.row(tr.input.positions[i]) += de.row(r);
    grads.segment_embedding.row(tr.input.segments[i]) += de.row(r);
    if (bins) grads.confidence_embedding.row(tr.input.conf_bins[i]) += de.row(r);
  }
  return loss;
}

std::vector<int> tag_targets(std::span<const TokenizedExample* const> examples) {
  std::vector<int> targets;
  for (const auto* ex : examples) {
    for (std::size_t t = 0; t < ex->attention_len; ++t) {
      targets.push_back(is_error(ex->labels_tok[t]) ? 1 : 0);
    }
  }
  return targets;
}

std::optional<std::size_t> mlm_word_rank(const TokenizedExample& example, std::size_t word_index,
                          const TaggerParameters& params, const ModelConfig& cfg) {
  if (cfg.mode != ModelMode::kMlm) throw ConfigError("mlm scoring needs an mlm-mode model");
  if (word_index >= example.num_words) {
    throw DataError(fmt::format("word index {} out of range for {} words", word_index,
                                example.num_words));
  }
  if (word_index >= example.word_to_tokens.size()) return std::nullopt;
  const TokenRange r = example.word_to_tokens[word_index];
  EncoderInput in = pack(example);
  for (std::size_t t = r.begin; t < r.end; ++t) in.token_ids[t] = kMask;
  const ForwardTrace tr = forward(in, params, cfg);
  std::size_t worst = 0;
  for (std::size_t t = r.begin; t < r.end; ++t) {
    const auto row = static_cast<Eigen::Index>(t);
    const double own = tr.logits(row, example.token_ids[t]);
    auto rank = static_cast<std::size_t>((tr.logits.row(row).array() > own).count());
    worst = std::max(worst, rank);
  }
  return worst;
}

bool mlm_mask_and_score(const TokenizedExample& example, std::size_t word_index,
                        const TaggerParameters& params, const ModelConfig& cfg, std::size_t k) {
  auto rank = mlm_word_rank(example, word_index, params, cfg);
  return !rank || *rank < k;
}

}  // namespace redace
