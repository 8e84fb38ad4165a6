#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include "doctest.h"
#include "redace/io.hpp"

using namespace redace;
namespace fs = std::filesystem;

namespace {

const fs::path kRoot = fs::temp_directory_path() / "redace_cli_test";

int run(const std::string& args) {
  const std::string cmd = std::string(REDACE_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << text;
}

std::string small_config() {
  const fs::path p = kRoot / "small.json";
  write_file(p, R"({"simulator": {"vocab_size": 300},
                    "sizes": {"train": 60, "dev": 20, "test": 20},
                    "encoding": {"vocab_target": 200},
                    "model": {"num_layers": 1, "hidden": 16, "num_heads": 2, "ffn_dim": 32},
                    "train": {"max_epochs": 1, "batch_size": 16},
                    "significance": {"subsets": 10}})");
  return p.string();
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("simulate writes splits, stats and a config echo, reproducibly") {
    const std::string cfg = small_config();
    const fs::path a = kRoot / "sim_a", b = kRoot / "sim_b";
    REQUIRE(run("simulate --config " + cfg + " --seed 3 --out " + a.string()) == 0);
    REQUIRE(run("simulate --config " + cfg + " --seed 3 --out " + b.string()) == 0);
    for (const char* f : {"train.jsonl", "dev.jsonl", "test.jsonl", "stats.json"}) {
      CHECK(fs::exists(a / f));
      CHECK(slurp(a / f) == slurp(b / f));
    }
    Json echo = read_json(a / "config.resolved.json");
    CHECK(echo["simulator"]["seed"] == 3);
    CHECK(echo["command"] == "simulate");
  }

  TEST_CASE("label reproduces the worked example and handles empty lines") {
    const fs::path d = kRoot / "label";
    write_file(d / "hyp.txt", "a small cat\nthe dog\n\n");
    write_file(d / "ref.txt", "a very big cat\nthe dog\nsome words\n");
    REQUIRE(run("label --hyp " + (d / "hyp.txt").string() + " --ref " + (d / "ref.txt").string() +
                " --out " + d.string()) == 0);
    auto ex = read_examples(d / "labeled.jsonl");
    REQUIRE(ex.size() == 3);
    CHECK(ex[0].labels ==
          LabelSequence{Label::kNotError, Label::kError, Label::kNotError});
    CHECK(ex[1].labels == LabelSequence{Label::kNotError, Label::kNotError});
    CHECK(ex[2].labels.empty());
    write_file(d / "short.txt", "a\n");
    CHECK(run("label --hyp " + (d / "short.txt").string() + " --ref " + (d / "ref.txt").string() +
              " --out " + d.string()) == 3);
  }

  TEST_CASE("train, predict, tune and evaluate chain together") {
    const std::string cfg = small_config();
    const fs::path d = kRoot / "chain";
    REQUIRE(run("simulate --config " + cfg + " --out " + (d / "data").string()) == 0);
    REQUIRE(run("train --config " + cfg + " --data " + (d / "data").string() +
                " --mode redace --out " + (d / "model").string()) == 0);
    for (const char* f : {"checkpoint.json", "vocab.txt", "binning.json", "train_report.json",
                          "config.resolved.json"}) {
      CHECK(fs::exists(d / "model" / f));
    }
    const std::string test = (d / "data" / "test.jsonl").string();
    REQUIRE(run("predict --model " + (d / "model").string() + " --data " + test + " --out " +
                (d / "pred").string()) == 0);
    REQUIRE(run("predict --system co --threshold 0.5 --data " + test + " --out " +
                (d / "co").string()) == 0);
    REQUIRE(run("tune --system co --data " + (d / "data" / "dev.jsonl").string() + " --out " +
                (d / "tune").string()) == 0);
    CHECK(slurp(d / "tune" / "curve.csv").rfind("param,f1\n", 0) == 0);
    REQUIRE(run("evaluate --config " + cfg + " --pred " + (d / "pred" / "predictions.jsonl").string() +
                " --baseline " + (d / "co" / "predictions.jsonl").string() + " --gold " + test +
                " --out " + (d / "eval").string()) == 0);
    Json e = read_json(d / "eval" / "eval.json");
    CHECK(e.contains("significance"));
    CHECK(e.contains("brier"));
    CHECK(e["span"].contains("f1"));
  }

  TEST_CASE("evaluating gold against itself scores 1") {
    const fs::path d = kRoot / "self";
    write_file(d / "gold.jsonl",
               "{\"id\":\"a\",\"hyp_words\":[\"x\",\"y\"],\"confidences\":[0.4,0.9],"
               "\"labels\":[\"Error\",\"NotError\"]}\n");
    write_file(d / "pred.jsonl", "{\"id\":\"a\",\"labels\":[\"Error\",\"NotError\"]}\n");
    REQUIRE(run("evaluate --pred " + (d / "pred.jsonl").string() + " --gold " +
                (d / "gold.jsonl").string() + " --out " + d.string()) == 0);
    CHECK(read_json(d / "eval.json")["word"]["f1"] == 1.0);
  }

  TEST_CASE("exit codes for configuration and data errors") {
    const fs::path d = kRoot / "errors";
    write_file(d / "bad.json", R"({"simulator": {"sub_rate": 0.7, "del_rate": 0.5}})");
    CHECK(run("simulate --config " + (d / "bad.json").string() + " --out " + d.string()) == 2);
    write_file(d / "unknown.json", R"({"simulatr": {}})");
    CHECK(run("simulate --config " + (d / "unknown.json").string() + " --out " + d.string()) == 2);
    CHECK(run("train --data " + (d / "missing").string() + " --out " + d.string()) == 3);
    CHECK(run("frobnicate") == 2);
  }

  TEST_CASE("a checkpoint used with a foreign binning is rejected") {
    const std::string cfg = small_config();
    const fs::path d = kRoot / "mismatch";
    REQUIRE(run("simulate --config " + cfg + " --out " + (d / "data").string()) == 0);
    REQUIRE(run("train --config " + cfg + " --data " + (d / "data").string() + " --out " +
                (d / "model").string()) == 0);
    write_json(d / "model" / "binning.json", to_json(equal_width_bins(7)));
    CHECK(run("predict --model " + (d / "model").string() + " --data " +
              (d / "data" / "test.jsonl").string() + " --out " + (d / "pred").string()) == 2);
  }
}
