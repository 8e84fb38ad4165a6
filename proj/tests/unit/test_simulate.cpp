#include <algorithm>
#include <cmath>
#include <sstream>

#include "doctest.h"
#include "redace/errors.hpp"
#include "redace/io.hpp"
#include "redace/simulate.hpp"

using namespace redace;

namespace {

SimulatorConfig small_config() {
  SimulatorConfig cfg;
  cfg.vocab_size = 500;
  return cfg;
}

std::string dump(const std::vector<LabeledExample>& v) {
  std::ostringstream os;
  write_examples(os, v);
  return os.str();
}

// Two-sample Kolmogorov–Smirnov statistic.
double ks_statistic(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(double(i) / a.size() - double(j) / b.size()));
  }
  return d;
}

}  // namespace

TEST_SUITE("simulate") {
  TEST_CASE("zero rates leave the reference untouched") {
    SimulatorConfig cfg = small_config();
    cfg.sub_rate = cfg.del_rate = cfg.ins_rate = 0.0;
    Simulator sim(cfg);
    Rng rng(1);
    for (int i = 0; i < 50; ++i) {
      WordSequence ref = sim.sample_reference(rng);
      Corruption c = sim.corrupt(ref, rng);
      CHECK(c.hyp == ref);
      for (const auto& op : c.true_ops.ops) CHECK(op.kind == EditKind::kEqual);
    }
  }

  TEST_CASE("substituting every word makes every label an error") {
    SimulatorConfig cfg = small_config();
    cfg.sub_rate = 1.0;
    cfg.del_rate = cfg.ins_rate = 0.0;
    auto b = generate_corpus(50, 0, 0, cfg);
    for (const auto& ex : b.train) {
      CHECK(ex.hyp.size() == ex.ref->size());
      CHECK(std::all_of(ex.labels.begin(), ex.labels.end(), is_error));
    }
  }

  TEST_CASE("a 10% substitution rate yields about 10% word errors") {
    SimulatorConfig cfg;
    cfg.sub_rate = 0.1;
    cfg.del_rate = cfg.ins_rate = 0.0;
    cfg.seed = 3;
    // About 100k words.
    auto test = Simulator(cfg).generate_split("test", 2, 10000);
    DatasetStats s = dataset_stats(test);
    CHECK(s.num_words > 95000);
    CHECK(s.error_rate >= 0.09);
    CHECK(s.error_rate <= 0.11);
  }

  TEST_CASE("mixed rates of 8/1/1 percent give roughly 10% errors") {
    SimulatorConfig cfg;
    cfg.sub_rate = 0.08;
    cfg.del_rate = 0.01;
    cfg.ins_rate = 0.01;
    auto b = generate_corpus(5000, 0, 0, cfg);
    CHECK(dataset_stats(b.train).error_rate == doctest::Approx(0.09).epsilon(0.15));
  }

  TEST_CASE("same seed gives byte-identical corpora; a new seed differs") {
    SimulatorConfig cfg = small_config();
    auto a = generate_corpus(50, 10, 10, cfg);
    auto b = generate_corpus(50, 10, 10, cfg);
    CHECK(dump(a.train) == dump(b.train));
    CHECK(dump(a.test) == dump(b.test));
    cfg.seed = 1;
    CHECK(dump(generate_corpus(50, 10, 10, cfg).train) != dump(a.train));
  }

  TEST_CASE("labels always equal the alignment labels and ids are disjoint") {
    auto b = generate_corpus(200, 50, 50, small_config());
    for (const auto* split : {&b.train, &b.dev, &b.test}) {
      for (const auto& ex : *split) {
        CHECK_NOTHROW(validate_example(ex));
        CHECK(ex.labels == label_errors(align(ex.hyp, *ex.ref), ex.hyp.size()));
      }
    }
    CHECK(b.train.front().id != b.dev.front().id);
    CHECK(b.dev.front().id != b.test.front().id);
  }

  TEST_CASE("empty training split is valid") {
    auto b = generate_corpus(0, 5, 5, small_config());
    CHECK(b.train.empty());
    CHECK(b.dev.size() == 5);
  }

  TEST_CASE("beta_separated gives correct words higher mean confidence") {
    SimulatorConfig cfg;
    Rng rng(4);
    double correct = 0, error = 0;
    for (int i = 0; i < 5000; ++i) {
      correct += assign_confidence(true, cfg, rng);
      error += assign_confidence(false, cfg, rng);
    }
    CHECK(correct / 5000 == doctest::Approx(0.9).epsilon(0.02));
    CHECK(error / 5000 == doctest::Approx(2.0 / 7.0).epsilon(0.05));
  }

  TEST_CASE("uninformative confidences pass a two-sample KS test") {
    SimulatorConfig cfg;
    cfg.confidence_mode = ConfidenceMode::kUninformative;
    Rng rng(5);
    const std::size_t n = 10000;
    std::vector<double> a, b;
    for (std::size_t i = 0; i < n; ++i) {
      a.push_back(assign_confidence(true, cfg, rng));
      b.push_back(assign_confidence(false, cfg, rng));
    }
    // Critical value at alpha = 0.01.
    const double crit = 1.628 * std::sqrt(2.0 / n);
    CHECK(ks_statistic(a, b) < crit);
  }

  TEST_CASE("uninformative and separated corpora share text and labels") {
    SimulatorConfig sep = small_config();
    SimulatorConfig uninf = sep;
    uninf.confidence_mode = ConfidenceMode::kUninformative;
    auto a = generate_corpus(30, 0, 0, sep);
    auto b = generate_corpus(30, 0, 0, uninf);
    for (std::size_t i = 0; i < a.train.size(); ++i) {
      CHECK(a.train[i].hyp == b.train[i].hyp);
      CHECK(a.train[i].labels == b.train[i].labels);
    }
  }

  TEST_CASE("calibrated confidences are reliable per bin") {
    SimulatorConfig cfg;
    cfg.confidence_mode = ConfidenceMode::kCalibrated;
    cfg.calibrated = {4.0, 2.0};
    cfg.del_rate = cfg.ins_rate = 0.0;
    cfg.sentence_len_min = cfg.sentence_len_max = 10;
    auto b = generate_corpus(20000, 0, 0, cfg);
    std::vector<std::size_t> total(20), correct(20);
    for (const auto& ex : b.train) {
      for (std::size_t i = 0; i < ex.hyp.size(); ++i) {
        std::size_t bin = std::min<std::size_t>(19, std::size_t(ex.confidences[i] / 0.05));
        ++total[bin];
        correct[bin] += !is_error(ex.labels[i]);
      }
    }
    int checked = 0;
    for (std::size_t k = 0; k < 20; ++k) {
      if (total[k] < 500) continue;
      ++checked;
      double frac = double(correct[k]) / total[k];
      CHECK(std::abs(frac - (0.05 * k + 0.025)) <= 0.05);
    }
    CHECK(checked >= 8);
  }

  TEST_CASE("invalid configurations are rejected") {
    SimulatorConfig cfg;
    cfg.sub_rate = 0.6;
    cfg.del_rate = 0.3;
    cfg.ins_rate = 0.2;
    CHECK_THROWS_AS(validate(cfg), ConfigError);
    cfg = SimulatorConfig{};
    cfg.beta_error = {0.0, 1.0};
    CHECK_THROWS_AS(validate(cfg), ConfigError);
    cfg = SimulatorConfig{};
    cfg.sentence_len_min = 5;
    cfg.sentence_len_max = 4;
    CHECK_THROWS_AS(Simulator{cfg}, ConfigError);
  }
}
