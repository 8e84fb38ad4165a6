#include "doctest.h"
#include "gradcheck.hpp"
#include "redace/errors.hpp"
#include "redace/pipeline.hpp"
#include "redace/train.hpp"

using namespace redace;
using gradcheck::random_examples;
using gradcheck::tiny_config;

namespace {

const Label N = Label::kNotError;
const Label E = Label::kError;

EncodedCorpus corpus_of(std::vector<TokenizedExample> ex) {
  EncodedCorpus c;
  c.vocab_hash = "v";
  c.binning_hash = "b";
  c.examples = std::move(ex);
  return c;
}

TrainConfig quick_train() {
  TrainConfig t;
  t.batch_size = 4;
  t.learning_rate = 1e-2;
  t.max_epochs = 6;
  return t;
}

}  // namespace

TEST_SUITE("train") {
  TEST_CASE("AdamW first step matches the closed form") {
    ModelConfig c = tiny_config(ModelMode::kTextOnly);
    TaggerParameters p = zero_parameters(c);
    p.tag_weight(0, 0) = 2.0;
    p.tag_bias(0, 0) = 2.0;
    TaggerParameters g = zero_parameters(c);
    g.tag_weight(0, 0) = 0.5;
    g.tag_bias(0, 0) = 0.5;
    TrainConfig t;
    t.learning_rate = 0.1;
    t.weight_decay = 0.01;
    AdamW opt(p, t);
    opt.step(p, g);
    // First bias-corrected update is g/|g| = 1; decay applies to weights only.
    CHECK(p.tag_weight(0, 0) == doctest::Approx(2.0 - 0.1 * (1.0 + 0.01 * 2.0)).epsilon(1e-9));
    CHECK(p.tag_bias(0, 0) == doctest::Approx(2.0 - 0.1).epsilon(1e-9));
    CHECK(opt.steps() == 1);
  }

  TEST_CASE("training lowers the loss and is bit-reproducible") {
    ModelConfig c = tiny_config(ModelMode::kRedAce);
    c.dropout = 0.1;
    // Errors are exactly the low-confidence tokens, so the task is learnable.
    auto ex = random_examples(c, 40, 5);
    for (auto& e : ex) {
      for (std::size_t t = 1; t + 1 < e.attention_len; ++t) {
        e.labels_tok[t] = e.conf_values[t] < 0.5 ? E : N;
      }
    }
    EncodedCorpus train_set = corpus_of(ex);
    EncodedCorpus dev_set = corpus_of(std::vector<TokenizedExample>(ex.begin(), ex.begin() + 10));
    TrainResult a = train(train_set, dev_set, c, quick_train());
    TrainResult b = train(train_set, dev_set, c, quick_train());
    CHECK(a.report == b.report);
    CHECK(a.params.token_embedding == b.params.token_embedding);
    CHECK(a.report.epoch_train_loss.back() < a.report.epoch_train_loss.front());
    CHECK(a.report.selected_dev_accuracy > 0.8);
    CHECK(a.report.evaluations.size() == 6);
    TrainConfig other = quick_train();
    other.seed = 1;
    CHECK(train(train_set, dev_set, c, other).params.token_embedding != a.params.token_embedding);
  }

  TEST_CASE("the selected checkpoint has the best dev accuracy, earliest on ties") {
    ModelConfig c = tiny_config(ModelMode::kTextOnly);
    auto ex = random_examples(c, 12, 6);
    TrainResult r = train(corpus_of(ex), corpus_of(ex), c, quick_train());
    double best = -1.0;
    std::size_t best_epoch = 0;
    for (const auto& e : r.report.evaluations) {
      if (e.dev_accuracy > best) {
        best = e.dev_accuracy;
        best_epoch = e.epoch;
      }
    }
    CHECK(r.report.selected_epoch == best_epoch);
    CHECK(r.report.selected_dev_accuracy == best);
    CHECK(tagging_accuracy(r.params, c, corpus_of(ex)) == doctest::Approx(best));
  }

  TEST_CASE("mid-epoch evaluation cadence") {
    ModelConfig c = tiny_config(ModelMode::kTextOnly);
    auto ex = random_examples(c, 16, 7);
    TrainConfig t = quick_train();
    t.max_epochs = 2;
    t.eval_every = 2;
    TrainResult r = train(corpus_of(ex), corpus_of(ex), c, t);
    CHECK(r.report.evaluations.size() == 4);
    CHECK(r.report.evaluations.front().step == 2);
  }

  TEST_CASE("masked-LM training runs and is seeded") {
    ModelConfig c = tiny_config(ModelMode::kMlm);
    auto ex = random_examples(c, 12, 8);
    TrainConfig t = quick_train();
    t.max_epochs = 2;
    TrainResult a = train_mlm(corpus_of(ex), c, t);
    TrainResult b = train_mlm(corpus_of(ex), c, t);
    CHECK(a.params.mlm_weight == b.params.mlm_weight);
    CHECK(a.report.epoch_train_loss.size() == 2);
  }

  TEST_CASE("divergence is reported as a numerical error") {
    ModelConfig c = tiny_config(ModelMode::kTextOnly);
    auto ex = random_examples(c, 8, 9);
    TrainConfig t = quick_train();
    t.learning_rate = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(train(corpus_of(ex), corpus_of(ex), c, t), NumericalError);
  }

  TEST_CASE("word predictions use the worst token and mark truncated words NotError") {
    ModelConfig c = tiny_config(ModelMode::kTextOnly);
    TaggerParameters p = zero_parameters(c);
    p.emb_ln_gain.setOnes();
    for (auto& L : p.layers) {
      L.ln1_gain.setOnes();
      L.ln2_gain.setOnes();
    }
    // Zero weights give equal logits everywhere: a tie resolves to NotError.
    auto ex = random_examples(c, 2, 10);
    ex[0].num_words += 2;  // two words lost to truncation
    auto preds = predict_word_labels(p, c, corpus_of(ex));
    REQUIRE(preds.size() == 2);
    CHECK(preds[0].labels.size() == ex[0].num_words);
    for (Label l : preds[0].labels) CHECK(l == N);
    CHECK(preds[0].error_prob.back() == 0.0);
    CHECK(preds[0].error_prob.front() == doctest::Approx(0.5));
    // A bias towards Error flags every retained word.
    p.tag_bias(0, 1) = 1.0;
    preds = predict_word_labels(p, c, corpus_of(ex));
    CHECK(preds[0].labels.front() == E);
    CHECK(preds[0].labels.back() == N);
  }

  TEST_CASE("checkpoint compatibility names the mismatched hash") {
    ModelConfig c = tiny_config(ModelMode::kTextOnly);
    Checkpoint ck{c, zero_parameters(c), "v", "b"};
    EncodedCorpus corpus = corpus_of(random_examples(c, 1, 1));
    CHECK_NOTHROW(check_compatible(ck, corpus));
    corpus.binning_hash = "other";
    try {
      check_compatible(ck, corpus);
      FAIL("expected a ConfigError");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("binning") != std::string::npos);
    }
    corpus.binning_hash = "b";
    corpus.vocab_hash = "other";
    CHECK_THROWS_AS(predict_word_labels(ck, corpus), ConfigError);
  }

  TEST_CASE("span extraction and painting are inverse") {
    LabelSequence l{E, E, N, E, N, N, E};
    auto spans = extract_spans(l);
    REQUIRE(spans.size() == 3);
    CHECK(spans[0] == Span{0, 1});
    CHECK(spans[1] == Span{3, 3});
    CHECK(spans[2] == Span{6, 6});
    CHECK(paint_spans(spans, l.size()) == l);
    CHECK(extract_spans({N, N}).empty());
  }

  TEST_CASE("train config validation") {
    TrainConfig t;
    t.batch_size = 0;
    CHECK_THROWS_AS(validate(t), ConfigError);
    CHECK(full_scale_train_profile().batch_size == 512);
    CHECK(full_scale_train_profile().learning_rate == 3e-5);
  }
}
