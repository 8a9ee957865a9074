// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "audiolab/cli/commands.hpp"
#include "audiolab/cli/config.hpp"
#include "audiolab/evalsuite/evalsuite.hpp"

using namespace audiolab;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path write_tiny_config(const fs::path& dir, std::uint64_t seed) {
  json cfg;
  cfg["seed"] = seed;
  cfg["out_dir"] = (dir / "run").string();
  cfg["corpus"] = {{"n_train", 48},      {"n_val", 12},          {"n_test", 10},
                   {"n_tag_only", 30},   {"clip_dur_min", 1.0},  {"clip_dur_max", 1.3},
                   {"zero_shot_per_class", 2}};
  cfg["mel"] = {{"hop", 640}, {"mel_bins", 32}, {"fmax", 7800.0}};
  cfg["biencoder"] = {{"conv_widths", json::array({4, 8})}, {"text_width", 32},
                      {"text_layers", 1},                   {"text_heads", 2},
                      {"text_ffn", 64},                     {"embed_dim", 32}};
  cfg["captioner"] = {{"enc_hidden", 8},  {"enc_layers", 1}, {"dec_width", 32},
                      {"dec_layers", 1},  {"dec_heads", 2},  {"dec_ffn", 64},
                      {"time_pool", 2},   {"max_len", 14}};
  cfg["captioner_train"] = {{"epochs", 4}, {"batch_size", 16}, {"crop_frames", 32},
                            {"peak_lr", 2e-3}, {"end_lr", 1e-4}};
  cfg["pretrain"] = {
      {"stage1", {{"batch_size", 16}, {"total_iters", 40}, {"warmup_iters", 4},
                  {"max_lr", 1e-3},   {"validate_every", 20}, {"val_pairs", 10},
                  {"crop_frames", 24}}},
      {"stage2", {{"batch_size", 16}, {"total_iters", 20}, {"warmup_iters", 2},
                  {"max_lr", 5e-4},   {"validate_every", 10}, {"val_pairs", 10},
                  {"crop_frames", 24}}}};
  cfg["finetune_retrieval"] = {{"epochs", 1}, {"batch_size", 16}, {"crop_frames", 24}};
  cfg["classifier"] = {{"steps", 40}, {"crop_frames", 24}};
  const fs::path path = dir / "config.json";
  std::ofstream of(path);
  of << cfg.dump(2);
  return path;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("config: empty object yields full profile defaults") {
  json desk = cli::load_config("", "desk");
  CHECK(desk.at("pretrain").at("stage1").at("batch_size").get<int>() == 32);

  // the paper profile records the reference hyperparameters
  json paper = cli::load_config("", "paper");
  CHECK(paper.at("pretrain").at("stage1").at("batch_size").get<int>() == 128);
  CHECK(paper.at("pretrain").at("stage1").at("total_iters").get<int>() == 200000);
  CHECK(paper.at("pretrain").at("stage1").at("warmup_iters").get<int>() == 10000);
  CHECK(paper.at("pretrain").at("stage1").at("validate_every").get<int>() == 500);
  CHECK(paper.at("pretrain").at("stage1").at("val_pairs").get<int>() == 1200);
  CHECK(paper.at("pretrain").at("stage2").at("total_iters").get<int>() == 15000);
  CHECK(paper.at("pretrain").at("stage2").at("warmup_iters").get<int>() == 750);
  CHECK(paper.at("pretrain").at("stage2").at("validate_every").get<int>() == 750);
  CHECK(paper.at("captioner_train").at("epochs").get<int>() == 25);
  CHECK(paper.at("captioner_train").at("batch_size").get<int>() == 64);
  CHECK(paper.at("captioner_train").at("peak_lr").get<double>() == doctest::Approx(5e-4));
  CHECK(paper.at("captioner_train").at("end_lr").get<double>() == doctest::Approx(5e-7));
  CHECK(paper.at("finetune_retrieval").at("epochs").get<int>() == 20);
  CHECK(paper.at("finetune_retrieval").at("batch_size").get<int>() == 128);
  CHECK(paper.at("bootstrap").at("beam_size").get<int>() == 3);
}

TEST_CASE("config: overrides are applied, junk is rejected with its path") {
  json over = {{"pretrain", {{"stage1", {{"batch_size", 32}}}}}};
  json merged = cli::merge_config(cli::default_config("desk"), over);
  CHECK(merged.at("pretrain").at("stage1").at("batch_size").get<int>() == 32);

  try {
    cli::merge_config(cli::default_config("desk"), json{{"pertrain", json::object()}});
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("/pertrain") != std::string::npos);
  }
  try {
    cli::merge_config(cli::default_config("desk"),
                      json{{"pretrain", {{"stage1", {{"batch_size", "large"}}}}}});
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("/pretrain/stage1/batch_size") != std::string::npos);
  }

  json bad = cli::default_config("desk");
  bad["pretrain"]["stage1"]["total_iters"] = -5;
  CHECK_THROWS_AS(cli::validate_config(bad), ConfigError);
}

TEST_CASE("cli: full tiny recipe runs end to end and is deterministic") {
  const fs::path dir = fs::temp_directory_path() / "cli_recipe";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const fs::path cfg = write_tiny_config(dir, 5);
  const std::string cfg_arg = "--config";

  auto run = [&](const std::string& sub) {
    return cli::run_command({cfg_arg, cfg.string(), sub});
  };
  REQUIRE(run("make-corpus") == 0);
  REQUIRE(run("train-captioner") == 0);
  REQUIRE(run("bootstrap") == 0);
  REQUIRE(run("pretrain") == 0);
  REQUIRE(run("eval-zero-shot") == 0);
  REQUIRE(run("eval-retrieval") == 0);
  REQUIRE(run("eval-caption") == 0);
  REQUIRE(run("finetune-retrieval") == 0);
  REQUIRE(run("finetune-classifier") == 0);

  const fs::path out = dir / "run";
  for (const char* artifact :
       {"resolved_config.json", "corpus/caption.jsonl", "corpus/tagonly.jsonl",
        "corpus/vocab.txt", "captioner.ckpt", "synthetic.jsonl", "pretrain/stage2.ckpt",
        "pretrain/stage1_trace.csv", "zero_shot_report.json", "retrieval_test_report.json",
        "caption_eval_report.json", "finetune_report.json", "classifier_report.json"})
    CHECK(fs::exists(out / artifact));

  // the zero-shot report parses and carries the run seed
  auto zs = evalsuite::MetricReport::load((out / "zero_shot_report.json").string());
  CHECK(zs.seed == 5);
  CHECK(zs.metrics.count("accuracy") == 1);

  // re-running the corpus step reproduces the manifests byte for byte
  const std::string before = slurp(out / "corpus/caption.jsonl");
  REQUIRE(run("make-corpus") == 0);
  CHECK(slurp(out / "corpus/caption.jsonl") == before);

  fs::remove_all(dir);
}

TEST_CASE("cli: missing artifacts fail with a diagnostic naming the field") {
  const fs::path dir = fs::temp_directory_path() / "cli_missing";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const fs::path cfg = write_tiny_config(dir, 1);

  std::ostringstream captured;
  auto* old = std::cerr.rdbuf(captured.rdbuf());
  const int rc = cli::run_command({"--config", cfg.string(), "pretrain"});
  std::cerr.rdbuf(old);
  CHECK(rc != 0);
  CHECK(captured.str().find("vocab") != std::string::npos);

  // unknown flag: usage error, nonzero exit
  CHECK(cli::run_command({"--config", cfg.string(), "pretrain", "--frobnicate"}) != 0);
  fs::remove_all(dir);
}
