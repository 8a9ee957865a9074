// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "audiolab/contrastive/trainer.hpp"
#include "audiolab/evalsuite/evalsuite.hpp"

using namespace audiolab;
namespace fs = std::filesystem;

namespace {

struct SmokeEnv {
  toygen::GeneratedCorpora corpora;
  textproc::Vocabulary vocab;
  audiofront::MelConfig mel_cfg;
  fs::path dir;

  explicit SmokeEnv(std::uint64_t seed, std::size_t n_train = 80) {
    dir = fs::temp_directory_path() / ("pipeline_smoke_" + std::to_string(seed));
    fs::create_directories(dir);
    const auto reg = toygen::default_registry();
    toygen::CorpusConfig cc;
    cc.n_train = n_train;
    cc.n_val = 40;
    cc.n_test = 20;
    cc.n_tag_only = 2;
    cc.clip_dur_min = 1.0;
    cc.clip_dur_max = 1.3;
    corpora = toygen::generate_corpus(reg, cc, seed, (dir / "wav").string());
    std::vector<std::string> caps;
    for (const auto* it : corpora.caption.split("train")) caps.push_back(it->caption);
    vocab = textproc::build_vocab(caps, 1);
    mel_cfg.hop = 640;
    mel_cfg.mel_bins = 32;
    mel_cfg.fmax = 7800.0;
  }
  ~SmokeEnv() { fs::remove_all(dir); }

  encoders::BiEncoderConfig tiny_model_cfg() const {
    encoders::BiEncoderConfig bc;
    bc.conv_widths = {4, 8};
    bc.mel_bins = 32;
    bc.vocab_size = vocab.size();
    bc.text_width = 32;
    bc.text_layers = 1;
    bc.text_heads = 2;
    bc.text_ffn = 64;
    bc.embed_dim = 32;
    bc.mel_fingerprint = mel_cfg.fingerprint();
    return bc;
  }
};

}  // namespace

TEST_CASE("two-stage pretraining: stage-2 validation loss beats the initial stage-1 loss") {
  SmokeEnv env(5);
  audiofront::FeatureStore feats(env.mel_cfg);
  encoders::BiEncoderModel model(env.tiny_model_cfg(), 1);

  contrastive::PairDataset synthetic =
      contrastive::make_pair_dataset(env.corpora.caption.split("train"), feats, env.vocab);
  contrastive::PairDataset real_train = synthetic;
  contrastive::PairDataset real_val =
      contrastive::make_pair_dataset(env.corpora.caption.split("val"), feats, env.vocab);

  contrastive::TrainConfig s1;
  s1.batch_size = 32;
  s1.total_iters = 2000;
  s1.warmup_iters = 200;
  s1.max_lr = 1e-3;
  s1.validate_every = 250;
  s1.val_pairs = 24;
  s1.crop_frames = 24;
  s1.seed = 7;
  contrastive::TrainConfig s2 = s1;
  s2.total_iters = 500;
  s2.warmup_iters = 50;
  s2.max_lr = 5e-4;
  s2.seed = 8;

  auto art = contrastive::pretrain_two_stage(model, synthetic, real_train, real_val, s1, s2,
                                             (env.dir / "ckpt").string());
  REQUIRE(!art.stage1.trace.empty());
  REQUIRE(!art.stage2.trace.empty());

  // final stage-2 validation loss sits below the very first stage-1 loss
  double last_val_loss = -1.0;
  for (const auto& row : art.stage2.trace)
    if (!std::isnan(row.val_loss)) last_val_loss = row.val_loss;
  REQUIRE(last_val_loss >= 0.0);
  CHECK(last_val_loss < art.stage1.initial_loss);

  // checkpoints exist and the stage-2 file reloads into the same outputs
  CHECK(fs::exists(art.stage1_ckpt));
  CHECK(fs::exists(art.stage2_ckpt));
  encoders::BiEncoderModel reloaded(env.tiny_model_cfg(), 999);
  contrastive::load_checkpoint(art.stage2_ckpt, reloaded.params());
  CHECK(reloaded.params().bytes_hash() == model.params().bytes_hash());
}

TEST_CASE("identical seeds and configs give identical checkpoints and reports") {
  auto run = [](const fs::path& out) {
    SmokeEnv env(11, 48);
    audiofront::FeatureStore feats(env.mel_cfg);
    encoders::BiEncoderModel model(env.tiny_model_cfg(), 3);
    contrastive::PairDataset synthetic =
        contrastive::make_pair_dataset(env.corpora.caption.split("train"), feats, env.vocab);
    contrastive::PairDataset real_val =
        contrastive::make_pair_dataset(env.corpora.caption.split("val"), feats, env.vocab);
    contrastive::PairDataset real_test =
        contrastive::make_pair_dataset(env.corpora.caption.split("test"), feats, env.vocab);
    contrastive::TrainConfig s1;
    s1.batch_size = 16;
    s1.total_iters = 60;
    s1.warmup_iters = 6;
    s1.max_lr = 1e-3;
    s1.validate_every = 20;
    s1.val_pairs = 12;
    s1.crop_frames = 24;
    s1.seed = 21;
    contrastive::TrainConfig s2 = s1;
    s2.total_iters = 30;
    s2.seed = 22;
    auto art =
        contrastive::pretrain_two_stage(model, synthetic, synthetic, real_val, s1, s2, out.string());
    evalsuite::MetricReport report = evalsuite::eval_retrieval(model, real_test, "test");
    return std::make_pair(contrastive::file_hash(art.stage2_ckpt), report.stable_digest());
  };
  const auto dir = fs::temp_directory_path() / "pipeline_det";
  auto [hash1, digest1] = run(dir / "a");
  auto [hash2, digest2] = run(dir / "b");
  CHECK(hash1 == hash2);
  CHECK(digest1 == digest2);
  fs::remove_all(dir);
}

TEST_CASE("zero-epoch fine-tune equals zero-shot evaluation of the loaded checkpoint") {
  SmokeEnv env(13, 48);
  audiofront::FeatureStore feats(env.mel_cfg);
  encoders::BiEncoderModel model(env.tiny_model_cfg(), 9);
  contrastive::PairDataset test =
      contrastive::make_pair_dataset(env.corpora.caption.split("test"), feats, env.vocab);
  contrastive::PairDataset train =
      contrastive::make_pair_dataset(env.corpora.caption.split("train"), feats, env.vocab);

  evalsuite::MetricReport direct = evalsuite::eval_retrieval(model, test, "finetune-test");

  evalsuite::FinetuneRetrievalConfig fc;
  fc.epochs = 0;
  fc.crop_frames = 24;
  evalsuite::FinetuneResult ft = evalsuite::finetune_retrieval(model, train, test, test, fc);
  CHECK(ft.report.metrics == direct.metrics);
}

TEST_CASE("contrastive stage rejects corpora smaller than the batch") {
  SmokeEnv env(17, 48);
  audiofront::FeatureStore feats(env.mel_cfg);
  encoders::BiEncoderModel model(env.tiny_model_cfg(), 2);
  contrastive::PairDataset tiny =
      contrastive::make_pair_dataset(env.corpora.caption.split("test"), feats, env.vocab);
  contrastive::TrainConfig cfg;
  cfg.batch_size = 64;  // > 20 test items
  cfg.total_iters = 5;
  cfg.warmup_iters = 0;
  cfg.validate_every = 5;
  CHECK_THROWS_AS(contrastive::train_contrastive_stage(model, tiny, tiny, cfg), ConfigError);
}
