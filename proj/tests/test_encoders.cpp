// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "audiolab/contrastive/contrastive.hpp"
#include "audiolab/encoders/biencoder.hpp"
#include "audiolab/toygen/toygen.hpp"

using namespace audiolab;
using namespace audiolab::encoders;

namespace {

audiofront::MelConfig test_mel_cfg() {
  audiofront::MelConfig cfg;
  cfg.mel_bins = 16;
  cfg.hop = 320;
  cfg.fmax = 7600.0;
  return cfg;
}

BiEncoderConfig test_model_cfg() {
  BiEncoderConfig cfg;
  cfg.conv_widths = {4, 8};
  cfg.mel_bins = 16;
  cfg.vocab_size = 24;
  cfg.text_width = 16;
  cfg.text_layers = 1;
  cfg.text_heads = 2;
  cfg.text_ffn = 32;
  cfg.embed_dim = 8;
  cfg.mel_fingerprint = test_mel_cfg().fingerprint();
  return cfg;
}

audiofront::MelSpectrogram event_mel(const std::string& event_id, std::uint64_t seed) {
  const auto reg = toygen::default_registry();
  auto clip = toygen::synth_event(reg.by_id(event_id), 16000, seed);
  clip.id = event_id + std::to_string(seed);
  return audiofront::logmel(clip, test_mel_cfg());
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return dot / std::sqrt(na * nb);
}

}  // namespace

TEST_CASE("identical clips produce identical embeddings of embed_dim length") {
  BiEncoderModel model(test_model_cfg(), 1);
  auto mel = event_mel("high_tone", 5);
  auto e1 = model.encode_audio(mel);
  auto e2 = model.encode_audio(mel);
  CHECK(e1.values.size() == 8);
  CHECK(e1.values == e2.values);
}

TEST_CASE("distinct events embed distinctly under a random init") {
  BiEncoderModel model(test_model_cfg(), 3);
  auto a = model.encode_audio(event_mel("low_tone", 7));
  auto b = model.encode_audio(event_mel("noise_burst", 8));
  const double c = cosine(a.values, b.values);
  CHECK(c > -1.0);
  CHECK(c < 1.0);
}

TEST_CASE("text encoder: determinism, padding mask, position sensitivity") {
  BiEncoderModel model(test_model_cfg(), 2);
  textproc::TokenSequence seq;
  seq.ids = {5, 9, 4, 11};
  auto e1 = model.encode_text(seq);
  auto e2 = model.encode_text(seq);
  CHECK(e1.values == e2.values);

  textproc::TokenSequence padded = seq;
  padded.ids.push_back(textproc::Vocabulary::kPad);
  padded.ids.push_back(textproc::Vocabulary::kPad);
  auto ep = model.encode_text(padded);
  for (std::size_t i = 0; i < e1.values.size(); ++i)
    CHECK(std::fabs(ep.values[i] - e1.values[i]) < 1e-9);

  textproc::TokenSequence permuted;
  permuted.ids = {11, 4, 9, 5};
  auto eperm = model.encode_text(permuted);
  double diff = 0.0;
  for (std::size_t i = 0; i < e1.values.size(); ++i)
    diff = std::max(diff, std::fabs(eperm.values[i] - e1.values[i]));
  CHECK(diff > 1e-9);  // position encoding active
}

TEST_CASE("embed_batch equals single-item encodings and is permutation-equivariant") {
  BiEncoderModel model(test_model_cfg(), 4);
  std::vector<audiofront::MelSpectrogram> mels = {event_mel("low_tone", 1),
                                                  event_mel("sharp_buzz", 2),
                                                  event_mel("rising_sweep", 3)};
  std::vector<const audiofront::MelSpectrogram*> ptrs = {&mels[0], &mels[1], &mels[2]};

  auto rows = embed_batch(model, ptrs);
  REQUIRE(rows.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    auto single = model.encode_audio(*ptrs[i]);
    for (std::size_t k = 0; k < single.values.size(); ++k)
      CHECK(std::fabs(rows[i][k] - single.values[k]) <= 1e-9);
  }

  std::vector<const audiofront::MelSpectrogram*> shuffled = {&mels[2], &mels[0], &mels[1]};
  auto rows2 = embed_batch(model, shuffled);
  CHECK(rows2[0] == rows[2]);
  CHECK(rows2[1] == rows[0]);
  CHECK(rows2[2] == rows[1]);

  // batch of one equals the single call
  auto one = embed_batch(model, {ptrs[0]});
  CHECK(one[0] == model.encode_audio(mels[0]).values);
}

TEST_CASE("gradient flows to every parameter through the contrastive loss") {
  BiEncoderConfig cfg = test_model_cfg();
  BiEncoderModel model(cfg, 6);

  std::vector<audiofront::MelSpectrogram> mels = {event_mel("low_tone", 11),
                                                  event_mel("high_tone", 12),
                                                  event_mel("noise_burst", 13)};
  std::vector<const audiofront::MelSpectrogram*> ptrs = {&mels[0], &mels[1], &mels[2]};
  AudioBatch batch = make_audio_batch(ptrs, 64, nullptr);
  diff::Tensor a = model.audio_embed(batch, true);

  std::vector<std::vector<std::size_t>> texts = {{5, 6, 7}, {8, 9}, {10, 11, 12, 13}};
  diff::Tensor t = model.text_embed(texts, true);

  diff::Tensor s = contrastive::similarity_matrix(a, t);
  auto parts = contrastive::infonce_loss_logtemp(s, model.log_temperature());
  parts.loss.backward();

  for (auto& p : model.params().params()) {
    INFO("parameter ", p.name);
    REQUIRE(p.tensor.has_grad());
    bool any = false;
    for (double g : p.tensor.grad())
      if (g != 0.0) {
        any = true;
        break;
      }
    // the token embedding only receives gradient at used rows
    CHECK(any);
  }
}

TEST_CASE("fingerprint and degenerate inputs are rejected") {
  BiEncoderModel model(test_model_cfg(), 7);
  audiofront::MelConfig other = test_mel_cfg();
  other.hop = 999;
  const auto reg = toygen::default_registry();
  auto clip = toygen::synth_event(reg.by_id("low_tone"), 16000, 1);
  auto mel = audiofront::logmel(clip, other);
  CHECK_THROWS_AS(model.encode_audio(mel), ConfigError);

  textproc::TokenSequence empty;
  CHECK_THROWS_AS(model.encode_text(empty), DegenerateInputError);

  // too short after pooling
  AudioBatch tiny;
  tiny.n = 1;
  tiny.t = 1;
  tiny.f = 16;
  tiny.data.assign(16, 0.0);
  CHECK_THROWS_AS(model.audio_embed(tiny, false), DegenerateInputError);
}
