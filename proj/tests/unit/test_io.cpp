#include <filesystem>
#include <sstream>

#include "doctest.h"
#include "gradcheck.hpp"
#include "redace/errors.hpp"
#include "redace/io.hpp"

using namespace redace;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / "redace_io_test";
  fs::create_directories(p);
  return p / name;
}

}  // namespace

TEST_SUITE("io") {
  TEST_CASE("records round-trip through JSONL") {
    std::vector<LabeledExample> v{
        {"a", {"x", "y"}, {0.25, 0.9}, {Label::kError, Label::kNotError},
         WordSequence{"x", "z"}},
        {"b", {}, {}, {}, std::nullopt},
    };
    std::stringstream ss;
    write_examples(ss, v);
    CHECK(read_examples(ss) == v);
  }

  TEST_CASE("record schema violations name the line") {
    std::stringstream ss(
        "{\"id\":\"a\",\"hyp_words\":[\"x\"],\"confidences\":[0.5],\"labels\":[\"NotError\"]}\n"
        "{\"id\":\"b\",\"hyp_words\":[\"x\"],\"confidences\":[0.5],\"labels\":[\"Maybe\"]}\n");
    try {
      read_examples(ss);
      FAIL("expected a StructuralError");
    } catch (const StructuralError& e) {
      CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
    std::stringstream range(
        "{\"id\":\"a\",\"hyp_words\":[\"x\"],\"confidences\":[1.5],\"labels\":[\"Error\"]}\n");
    CHECK_THROWS_AS(read_examples(range), RangeError);
    std::stringstream broken("{not json\n");
    CHECK_THROWS_AS(read_examples(broken), StructuralError);
  }

  TEST_CASE("configs round-trip and reject unknown keys") {
    SimulatorConfig s;
    s.seed = 9;
    s.calibrated_constant = 0.8;
    s.confidence_mode = ConfidenceMode::kCalibrated;
    CHECK(simulator_config_from_json(to_json(s)) == s);
    ModelConfig m = gradcheck::tiny_config(ModelMode::kConcatScore);
    CHECK(model_config_from_json(to_json(m)) == m);
    TrainConfig t;
    t.max_epochs = 3;
    CHECK(train_config_from_json(to_json(t)) == t);
    CHECK_THROWS_AS(train_config_from_json(Json{{"epochs", 3}}), ConfigError);
    CHECK_THROWS_AS(simulator_config_from_json(Json{{"sub_rate", "high"}}), ConfigError);
    CHECK(simulator_config_from_json(Json::object()) == SimulatorConfig{});
  }

  TEST_CASE("binning JSON carries a verified hash") {
    BinningConfig q{BinningAlgorithm::kQuantile, 3, {0.2, 0.7}};
    Json j = to_json(q);
    CHECK(binning_config_from_json(j) == q);
    j["boundaries"] = {0.2, 0.8};
    CHECK_THROWS_AS(binning_config_from_json(j), ConfigError);
  }

  TEST_CASE("checkpoint round-trip is exact") {
    ModelConfig c = gradcheck::tiny_config(ModelMode::kRedAce);
    Checkpoint ck{c, init_params(c, 4), "vh", "bh"};
    ck.params.layers[0].wq(0, 0) = 0.1 + 1e-17;
    const fs::path p = scratch("ckpt.json");
    save_checkpoint(p, ck);
    Checkpoint back = load_checkpoint(p);
    CHECK(back.model == c);
    CHECK(back.vocab_hash == "vh");
    CHECK(back.binning_hash == "bh");
    CHECK(back.params.layers[0].wq == ck.params.layers[0].wq);
    CHECK(back.params.confidence_embedding == ck.params.confidence_embedding);
  }

  TEST_CASE("checkpoint shape mismatch is a configuration error") {
    ModelConfig c = gradcheck::tiny_config(ModelMode::kRedAce);
    Checkpoint ck{c, init_params(c, 4), "vh", "bh"};
    const fs::path p = scratch("ckpt_bad.json");
    save_checkpoint(p, ck);
    Json j = read_json(p);
    j["model"]["hidden"] = 4;
    j["model"]["num_heads"] = 2;
    write_json(p, j);
    CHECK_THROWS_AS(load_checkpoint(p), ConfigError);
  }

  TEST_CASE("vocabulary and predictions files") {
    auto pieces = special_pieces();
    pieces.push_back("ka");
    pieces.push_back("##to");
    Vocabulary v = Vocabulary::from_pieces(pieces);
    save_vocab(scratch("vocab.txt"), v);
    CHECK(load_vocab(scratch("vocab.txt")).hash() == v.hash());
    std::vector<WordPrediction> preds{{"a", {Label::kError}, {0.75}}};
    write_predictions(scratch("p.jsonl"), preds);
    CHECK(read_predictions(scratch("p.jsonl")) == preds);
  }
}
