#include "doctest.h"
#include "oracles.hpp"
#include "redace/align.hpp"
#include "redace/errors.hpp"
#include "redace/random.hpp"

using namespace redace;

namespace {

const Label N = Label::kNotError;
const Label E = Label::kError;

LabelSequence labels_for(const WordSequence& hyp, const WordSequence& ref) {
  return label_errors(align(hyp, ref), hyp.size());
}

}  // namespace

TEST_SUITE("align") {
  TEST_CASE("substitution and deletion against a longer reference") {
    CHECK(labels_for({"a", "small", "cat"}, {"a", "very", "big", "cat"}) ==
          LabelSequence{N, E, N});
  }

  TEST_CASE("identical sequences are all equal ops") {
    WordSequence w{"the", "cat", "sat"};
    EditPath p = align(w, w);
    CHECK(p.cost == 0);
    for (const auto& op : p.ops) CHECK(op.kind == EditKind::kEqual);
    CHECK(label_errors(p, w.size()) == LabelSequence{N, N, N});
  }

  TEST_CASE("empty hypothesis gives an all-insert path and no labels") {
    EditPath p = align({}, {"a", "b"});
    CHECK(p.cost == 2);
    REQUIRE(p.ops.size() == 2);
    for (const auto& op : p.ops) CHECK(op.kind == EditKind::kInsert);
    CHECK(label_errors(p, 0).empty());
  }

  TEST_CASE("empty reference marks every hypothesis word") {
    CHECK(labels_for({"a", "b"}, {}) == LabelSequence{E, E});
  }

  TEST_CASE("normalization folds case before comparing") {
    CHECK(labels_for({"The", "CAT"}, {"the", "cat"}) == LabelSequence{N, N});
    NormalizerConfig keep_case;
    keep_case.lowercase = false;
    CHECK(align({"The"}, {"the"}, keep_case).cost == 1);
    NormalizerConfig strip;
    strip.strip_punctuation = true;
    CHECK(align({"cat,"}, {"cat"}, strip).cost == 0);
    CHECK(align({"cat,"}, {"cat"}).cost == 1);
  }

  TEST_CASE("backtrace tie preference is deterministic") {
    // Deleting either copy of "a" costs 1; the diagonal preference at the end
    // keeps the second copy.
    EditPath p = align({"a", "a"}, {"a"});
    CHECK(p.cost == 1);
    CHECK(label_errors(p, 2) == LabelSequence{E, N});
    CHECK(align({"a", "a"}, {"a"}) == p);
  }

  TEST_CASE("validate_path rejects broken coverage") {
    EditPath p = align({"a", "b"}, {"a", "c"});
    CHECK_NOTHROW(validate_path(p, 2, 2));
    EditPath missing = p;
    missing.ops.pop_back();
    CHECK_THROWS_AS(validate_path(missing, 2, 2), StructuralError);
    EditPath wrong_cost = p;
    wrong_cost.cost = 0;
    CHECK_THROWS_AS(validate_path(wrong_cost, 2, 2), StructuralError);
    CHECK_THROWS_AS(label_errors(p, 3), StructuralError);
  }

  TEST_CASE("align cost agrees with both distance implementations") {
    Rng rng(7);
    for (int trial = 0; trial < 300; ++trial) {
      WordSequence a, b;
      std::size_t la = rng.below(7), lb = rng.below(7);
      for (std::size_t i = 0; i < la; ++i) a.push_back(std::string(1, char('a' + rng.below(4))));
      for (std::size_t i = 0; i < lb; ++i) b.push_back(std::string(1, char('a' + rng.below(4))));
      EditPath p = align(a, b);
      CHECK_NOTHROW(validate_path(p, a.size(), b.size()));
      CHECK(p.cost == levenshtein_distance(a, b));
      CHECK(p.cost == oracle::edit_distance(a, b));
    }
  }

  TEST_CASE("validate_example enforces parallel vectors and ranges") {
    LabeledExample ex{"x", {"a", "b"}, {0.5, 0.9}, {N, E}, std::nullopt};
    CHECK_NOTHROW(validate_example(ex));
    ex.confidences = {0.5};
    CHECK_THROWS_AS(validate_example(ex), DataError);
    ex.confidences = {0.5, 1.5};
    CHECK_THROWS_AS(validate_example(ex), RangeError);
  }

  TEST_CASE("dataset statistics") {
    std::vector<LabeledExample> d{
        {"1", {"a", "b"}, {1.0, 1.0}, {N, E}, std::nullopt},
        {"2", {"c", "d", "e"}, {1.0, 1.0, 1.0}, {N, N, N}, std::nullopt},
    };
    DatasetStats s = dataset_stats(d);
    CHECK(s.num_examples == 2);
    CHECK(s.num_words == 5);
    CHECK(s.num_errors == 1);
    CHECK(s.error_rate_defined);
    CHECK(s.error_rate == doctest::Approx(0.2));
    CHECK_FALSE(dataset_stats({}).error_rate_defined);
  }
}
