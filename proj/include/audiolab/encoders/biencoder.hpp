// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "audiolab/audiofront/mel.hpp"
#include "audiolab/diffcore/adam.hpp"
#include "audiolab/diffcore/layers.hpp"
#include "audiolab/textproc/text.hpp"

namespace audiolab::encoders {

struct BiEncoderConfig {
  // audio encoder: conv blocks (conv3x3 + batch norm + relu), 2x2 max pool
  // between every two blocks, global mean+max pooling, FC projection
  std::vector<std::size_t> conv_widths = {16, 32, 64, 128, 256, 256};
  std::size_t mel_bins = 64;
  // text encoder: token embedding + pre-LN transformer + summary token + FC
  std::size_t vocab_size = 0;
  std::size_t text_width = 128;
  std::size_t text_layers = 2;
  std::size_t text_heads = 4;
  std::size_t text_ffn = 256;
  std::size_t max_text_len = 32;
  // joint space
  std::size_t embed_dim = 128;
  double init_temperature = 0.07;
  double temperature_floor = 1e-3;
  double bn_momentum = 0.9;
  std::uint64_t mel_fingerprint = 0;

  nlohmann::json to_json() const;
  static BiEncoderConfig from_json(const nlohmann::json& j);
  std::uint64_t fingerprint() const;
  std::size_t num_pools() const { return conv_widths.size() / 2; }
  std::size_t min_audio_frames() const { return std::size_t(1) << num_pools(); }
};

struct EmbeddingVector {
  enum class Modality { kAudio, kText };
  std::vector<double> values;
  Modality modality = Modality::kAudio;
};

// Equal-length batch of log-mel excerpts, shaped [N, 1, T, F].
struct AudioBatch {
  std::vector<double> data;
  std::size_t n = 0, t = 0, f = 0;
};

// Audio/text bi-encoder with a jointly learnable temperature.
class BiEncoderModel {
public:
  BiEncoderModel(BiEncoderConfig cfg, std::uint64_t seed);

  const BiEncoderConfig& config() const { return cfg_; }
  diff::ParamStore& params() { return params_; }
  const diff::ParamStore& params() const { return params_; }

  // tau = exp(log_temperature), clamped from below after optimizer steps
  diff::Tensor log_temperature() { return log_temp_; }
  double temperature() const { return std::exp(log_temp_.data()[0]); }
  void clamp_temperature();

  // graph-building forward passes (training mode drives batch-norm stats)
  diff::Tensor audio_embed(const AudioBatch& batch, bool training);
  diff::Tensor text_embed(const std::vector<std::vector<std::size_t>>& token_rows, bool training);

  // single-item inference
  EmbeddingVector encode_audio(const audiofront::MelSpectrogram& mel);
  EmbeddingVector encode_text(const textproc::TokenSequence& tokens);

private:
  diff::Tensor conv_stack(const diff::Tensor& x, bool training);
  diff::Tensor text_stack_single(const diff::Tensor& emb_with_pos, const diff::Tensor& mask);

  BiEncoderConfig cfg_;
  diff::ParamStore params_;
  diff::Tensor log_temp_;

  struct ConvBlock {
    diff::Tensor w, b, gamma, beta, run_mean, run_var;
  };
  std::vector<ConvBlock> conv_;
  diff::LinearParams audio_proj_;

  diff::Tensor token_embed_;
  struct TextLayer {
    diff::LayerNormParams ln1, ln2;
    diff::MhaParams att;
    diff::FfnParams ffn;
  };
  std::vector<TextLayer> text_layers_;
  diff::LayerNormParams text_final_ln_;
  diff::LinearParams text_proj_;
  std::vector<double> posenc_;  // [max_text_len + 1, text_width]
};

// Inference over many same-modality items; row i equals the single-item
// encoding of item i exactly.
std::vector<std::vector<double>> embed_batch(BiEncoderModel& model,
                                             const std::vector<const audiofront::MelSpectrogram*>& mels);
std::vector<std::vector<double>> embed_batch(BiEncoderModel& model,
                                             const std::vector<const textproc::TokenSequence*>& seqs);

// Deterministic excerpt helpers for rectangular training batches.
AudioBatch make_audio_batch(const std::vector<const audiofront::MelSpectrogram*>& mels,
                            std::size_t crop_frames, Rng* crop_rng /* null = centered */);

}  // namespace audiolab::encoders
