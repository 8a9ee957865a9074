// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "audiolab/audiofront/feature_store.hpp"
#include "audiolab/captioner/beam.hpp"
#include "audiolab/diffcore/gradsuite.hpp"
#include "audiolab/diffcore/layers.hpp"
#include "audiolab/diffcore/params.hpp"
#include "audiolab/textproc/text.hpp"
#include "audiolab/toygen/toygen.hpp"

namespace audiolab::captioner {

struct CaptionerConfig {
  std::size_t feature_dim = 64;  // mel bins
  std::size_t time_pool = 2;     // mean-pool factor on frames before the GRU
  std::size_t enc_hidden = 64;   // GRU width per direction
  std::size_t enc_layers = 3;    // bidirectional layers
  std::size_t dec_width = 128;
  std::size_t dec_layers = 2;
  std::size_t dec_heads = 4;
  std::size_t dec_ffn = 256;
  std::size_t max_len = 20;  // decoded tokens, EOS included
  std::size_t vocab_size = 0;
  std::vector<std::string> tag_vocab;  // tag-embedding row order
  std::uint64_t mel_fingerprint = 0;

  nlohmann::json to_json() const;
  static CaptionerConfig from_json(const nlohmann::json& j);
  std::uint64_t fingerprint() const;
};

// Tag-guided captioning model: bidirectional GRU feature encoder and a
// causal transformer decoder whose every input embedding is the word
// embedding plus the mean tag embedding.
class CaptionModel {
public:
  CaptionModel(CaptionerConfig cfg, std::uint64_t seed);

  const CaptionerConfig& config() const { return cfg_; }
  diff::ParamStore& params() { return params_; }
  const diff::ParamStore& params() const { return params_; }
  diff::Tensor tag_embedding_table() { return te_; }

  std::size_t tag_index(const std::string& tag) const;

  // time-pooled feature frames; returns [frames, feature_dim] row-major
  std::vector<double> prepare_features(const audiofront::MelSpectrogram& mel,
                                       std::size_t* out_frames) const;

  // encoder over a rectangular feature batch -> batch-major states
  // [B * frames', dec_width]
  diff::Tensor encode_batch(const std::vector<std::vector<double>>& features,
                            std::size_t frames, std::size_t* out_frames);
  // single clip, inference (no gradient recording)
  diff::Tensor encode_clip(const audiofront::MelSpectrogram& mel);

  // e^g: arithmetic mean of the tag embedding rows (order-independent)
  diff::Tensor fuse_tags(const std::vector<std::string>& tags);

  // decoder logits [L, vocab] for input tokens (BOS-led) against encoder
  // states [T', dec_width]; every input embedding gets + e^g
  diff::Tensor decoder_logits(const diff::Tensor& enc_states,
                              const std::vector<std::size_t>& input_tokens,
                              const diff::Tensor& tag_embedding);

  // probability vector over the vocabulary for the next token
  std::vector<double> decode_step(const diff::Tensor& enc_states,
                                  const std::vector<std::size_t>& prefix_with_bos,
                                  const diff::Tensor& tag_embedding);

  // full clip decode with the clip's tags
  BeamHypothesis caption_clip(const audiofront::MelSpectrogram& mel,
                              const std::vector<std::string>& tags, std::size_t beam_size);

private:
  CaptionerConfig cfg_;
  diff::ParamStore params_;

  struct BiGru {
    diff::GruParams fwd, bwd;
  };
  std::vector<BiGru> enc_layers_;
  diff::LinearParams enc_proj_;

  diff::Tensor we_;  // word embeddings [vocab, d]
  diff::Tensor te_;  // tag embeddings [tags, d]
  struct DecLayer {
    diff::LayerNormParams ln1, ln2, ln3;
    diff::MhaParams self_att, cross_att;
    diff::FfnParams ffn;
  };
  std::vector<DecLayer> dec_layers_;
  diff::LayerNormParams dec_final_ln_;
  diff::LinearParams out_proj_;
  std::vector<double> posenc_;
};

// Word-level cross entropy: sum over positions of -log p(target), averaged
// per unmasked token. logits [R, vocab], one target per row.
diff::Tensor word_ce_loss(const diff::Tensor& logits, const std::vector<std::size_t>& targets,
                          const std::vector<double>& token_mask);

struct CaptionTrainConfig {
  std::size_t epochs = 25;     // defaults follow the reference training recipe
  std::size_t batch_size = 64;
  double peak_lr = 5e-4;
  double end_lr = 5e-7;
  double warmup_frac = 0.1;
  std::size_t crop_frames = 101;
  std::uint64_t seed = 0;
  bool freeze_tag_embedding = false;  // zero-TE ablation
  bool random_crops = true;           // false = centered excerpts (fixed batches)
};

struct CaptionTrainResult {
  struct Step {
    std::size_t step;
    double loss;
    double lr;
  };
  std::vector<Step> trace;
  std::vector<double> epoch_val_ce;
  double best_val_ce = 0.0;
  std::size_t best_epoch = 0;
};

// Teacher-forced CE training; the model is left at the best-validation
// checkpoint (lowest val CE).
CaptionTrainResult train_captioner(CaptionModel& model,
                                   const std::vector<const toygen::AudioTextExample*>& train,
                                   const std::vector<const toygen::AudioTextExample*>& val,
                                   audiofront::FeatureStore& features,
                                   const textproc::Vocabulary& vocab,
                                   const CaptionTrainConfig& cfg);

// Teacher-forced CE of a set of items under the current parameters.
double validation_ce(CaptionModel& model,
                     const std::vector<const toygen::AudioTextExample*>& items,
                     audiofront::FeatureStore& features, const textproc::Vocabulary& vocab);

void save_caption_model(const std::string& path, const CaptionModel& model,
                        const std::string& stage);

// Finite-difference checks of the word-level CE loss, three random shapes.
std::vector<diff::NamedGradCheck> ce_gradient_checks(std::uint64_t seed);
CaptionModel load_caption_model(const std::string& path);

}  // namespace audiolab::captioner
