#include "doctest.h"
#include "gradcheck.hpp"
#include "redace/errors.hpp"
#include "redace/model.hpp"

using namespace redace;
using gradcheck::random_examples;
using gradcheck::tiny_config;

TEST_SUITE("model") {
  TEST_CASE("mode names round-trip") {
    for (ModelMode m : {ModelMode::kTextOnly, ModelMode::kRedAce, ModelMode::kConcatScore,
                        ModelMode::kMlm}) {
      CHECK(parse_model_mode(to_string(m)) == m);
    }
    CHECK_THROWS_AS(parse_model_mode("bert"), ConfigError);
  }

  TEST_CASE("config validation") {
    ModelConfig c = tiny_config(ModelMode::kRedAce);
    CHECK_NOTHROW(validate(c));
    c.num_heads = 3;
    CHECK_THROWS_AS(validate(c), ConfigError);
    c = tiny_config(ModelMode::kRedAce);
    c.vocab_size = 4;
    CHECK_THROWS_AS(validate(c), ConfigError);
  }

  TEST_CASE("parameter shapes per mode") {
    auto text = zero_parameters(tiny_config(ModelMode::kTextOnly));
    auto concat = zero_parameters(tiny_config(ModelMode::kConcatScore));
    auto mlm = zero_parameters(tiny_config(ModelMode::kMlm));
    CHECK(text.tag_weight.rows() == 8);
    CHECK(concat.tag_weight.rows() == 9);
    CHECK(text.confidence_embedding.rows() == 5);
    CHECK(mlm.tag_weight.size() == 0);
    CHECK(mlm.mlm_weight.cols() == 20);
    CHECK_THROWS_AS(check_shapes(concat, tiny_config(ModelMode::kTextOnly)), ConfigError);
    CHECK_NOTHROW(check_shapes(text, tiny_config(ModelMode::kRedAce)));
  }

  TEST_CASE("initialisation is seeded and truncated") {
    ModelConfig c = tiny_config(ModelMode::kRedAce);
    auto a = init_params(c, 5);
    auto b = init_params(c, 5);
    auto d = init_params(c, 6);
    CHECK(a.token_embedding == b.token_embedding);
    CHECK(a.token_embedding != d.token_embedding);
    CHECK(a.token_embedding.cwiseAbs().maxCoeff() <= 2 * kInitStddev);
    CHECK(a.confidence_embedding.cwiseAbs().maxCoeff() <= 2 * kInitStddev);
    CHECK(a.emb_ln_gain.minCoeff() == 1.0);
    CHECK(a.layers[0].bq.cwiseAbs().maxCoeff() == 0.0);
  }

  TEST_CASE("zero confidence embedding reduces redace to text_only") {
    ModelConfig red = tiny_config(ModelMode::kRedAce);
    ModelConfig text = tiny_config(ModelMode::kTextOnly);
    TaggerParameters p = init_params(red, 1);
    p.confidence_embedding.setZero();
    auto ex = random_examples(red, 4, 2);
    std::vector<const TokenizedExample*> ptrs;
    for (const auto& e : ex) ptrs.push_back(&e);
    EncoderInput in = pack(ptrs);
    Mat a = forward(in, p, red).logits;
    Mat b = forward(in, p, text).logits;
    CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-12);
  }

  TEST_CASE("packing several sequences matches running them alone") {
    ModelConfig c = tiny_config(ModelMode::kRedAce);
    TaggerParameters p = init_params(c, 4);
    auto ex = random_examples(c, 3, 8);
    std::vector<const TokenizedExample*> ptrs;
    for (const auto& e : ex) ptrs.push_back(&e);
    Mat packed = forward(pack(ptrs), p, c).logits;
    Eigen::Index row = 0;
    for (const auto& e : ex) {
      Mat alone = forward(pack(e), p, c).logits;
      CHECK((packed.middleRows(row, alone.rows()) - alone).cwiseAbs().maxCoeff() < 1e-12);
      row += alone.rows();
    }
  }

  TEST_CASE("confidence reaches the head only in the modes that use it") {
    auto ex = random_examples(tiny_config(ModelMode::kRedAce), 1, 3);
    for (ModelMode m : {ModelMode::kTextOnly, ModelMode::kRedAce, ModelMode::kConcatScore}) {
      ModelConfig c = tiny_config(m);
      TaggerParameters p = init_params(c, 2);
      TokenizedExample shifted = ex[0];
      for (std::size_t t = 1; t + 1 < shifted.attention_len; ++t) {
        shifted.conf_values[t] = 1.0 - shifted.conf_values[t];
        shifted.conf_bins[t] = static_cast<int>(c.num_bins - 1) - shifted.conf_bins[t];
      }
      const double delta =
          (forward(pack(ex[0]), p, c).logits - forward(pack(shifted), p, c).logits)
              .cwiseAbs()
              .maxCoeff();
      if (m == ModelMode::kTextOnly) CHECK(delta == 0.0);
      else CHECK(delta > 0.0);
    }
  }

  TEST_CASE("analytic gradients match finite differences") {
    for (auto r : gradcheck::check(ModelMode::kRedAce, false)) {
      INFO(r.name);
      CHECK(r.rel_error < 1e-4);
    }
  }

  TEST_CASE("cross entropy skips negative targets") {
    Mat logits(2, 2);
    logits << 0.0, 0.0, 5.0, -5.0;
    std::vector<int> t{1, -1};
    LossSum l = cross_entropy(logits, t);
    CHECK(l.count == 1);
    CHECK(l.sum == doctest::Approx(std::log(2.0)));
  }

  TEST_CASE("out-of-range inputs are data errors") {
    ModelConfig c = tiny_config(ModelMode::kRedAce);
    TaggerParameters p = init_params(c, 1);
    auto ex = random_examples(c, 1, 1);
    EncoderInput in = pack(ex[0]);
    in.token_ids[1] = 99;
    CHECK_THROWS_AS(forward(in, p, c), DataError);
  }

  TEST_CASE("non-finite weights raise a numerical error") {
    ModelConfig c = tiny_config(ModelMode::kRedAce);
    TaggerParameters p = init_params(c, 1);
    p.tag_weight(0, 0) = std::numeric_limits<double>::infinity();
    auto ex = random_examples(c, 1, 1);
    CHECK_THROWS_AS(forward(pack(ex[0]), p, c), NumericalError);
  }
}
