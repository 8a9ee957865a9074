// SPDX-License-Identifier: Apache-2.0

#include "audiolab/encoders/biencoder.hpp"

#include <cmath>

namespace audiolab::encoders {

using namespace audiolab::diff;

nlohmann::json BiEncoderConfig::to_json() const {
  return {{"conv_widths", conv_widths},
          {"mel_bins", mel_bins},
          {"vocab_size", vocab_size},
          {"text_width", text_width},
          {"text_layers", text_layers},
          {"text_heads", text_heads},
          {"text_ffn", text_ffn},
          {"max_text_len", max_text_len},
          {"embed_dim", embed_dim},
          {"init_temperature", init_temperature},
          {"temperature_floor", temperature_floor},
          {"bn_momentum", bn_momentum},
          {"mel_fingerprint", mel_fingerprint}};
}

BiEncoderConfig BiEncoderConfig::from_json(const nlohmann::json& j) {
  BiEncoderConfig c;
  c.conv_widths = j.at("conv_widths").get<std::vector<std::size_t>>();
  c.mel_bins = j.at("mel_bins").get<std::size_t>();
  c.vocab_size = j.at("vocab_size").get<std::size_t>();
  c.text_width = j.at("text_width").get<std::size_t>();
  c.text_layers = j.at("text_layers").get<std::size_t>();
  c.text_heads = j.at("text_heads").get<std::size_t>();
  c.text_ffn = j.at("text_ffn").get<std::size_t>();
  c.max_text_len = j.at("max_text_len").get<std::size_t>();
  c.embed_dim = j.at("embed_dim").get<std::size_t>();
  c.init_temperature = j.at("init_temperature").get<double>();
  c.temperature_floor = j.at("temperature_floor").get<double>();
  c.bn_momentum = j.at("bn_momentum").get<double>();
  c.mel_fingerprint = j.at("mel_fingerprint").get<std::uint64_t>();
  return c;
}

std::uint64_t BiEncoderConfig::fingerprint() const { return fnv1a64(to_json().dump()); }

BiEncoderModel::BiEncoderModel(BiEncoderConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
  if (cfg_.vocab_size < 4) throw ConfigError("BiEncoderModel: vocab_size must include reserved tokens");
  if (cfg_.conv_widths.empty() || cfg_.conv_widths.size() % 2 != 0)
    throw ConfigError("BiEncoderModel: conv_widths must be a non-empty even-length list");
  if (cfg_.text_width % cfg_.text_heads != 0)
    throw ConfigError("BiEncoderModel: text_width must be divisible by text_heads");

  Rng rng(seed);
  std::size_t in_ch = 1;
  for (std::size_t i = 0; i < cfg_.conv_widths.size(); ++i) {
    const std::size_t out_ch = cfg_.conv_widths[i];
    ConvBlock blk;
    const std::string p = "audio.conv" + std::to_string(i);
    blk.w = params_.add(p + ".w", Tensor::zeros({out_ch, in_ch, 3, 3}));
    init_glorot(blk.w, rng, in_ch * 9, out_ch * 9);
    blk.b = params_.add(p + ".b", Tensor::zeros({out_ch}));
    blk.gamma = params_.add(p + ".bn.gamma", Tensor::full({out_ch}, 1.0));
    blk.beta = params_.add(p + ".bn.beta", Tensor::zeros({out_ch}));
    blk.run_mean = params_.add_buffer(p + ".bn.running_mean", Tensor::zeros({out_ch}));
    blk.run_var = params_.add_buffer(p + ".bn.running_var", Tensor::full({out_ch}, 1.0));
    conv_.push_back(blk);
    in_ch = out_ch;
  }
  audio_proj_.w = params_.add("audio.proj.w", Tensor::zeros({in_ch, cfg_.embed_dim}));
  init_glorot(audio_proj_.w, rng, in_ch, cfg_.embed_dim);
  audio_proj_.b = params_.add("audio.proj.b", Tensor::zeros({cfg_.embed_dim}));

  token_embed_ = params_.add("text.embed", Tensor::zeros({cfg_.vocab_size, cfg_.text_width}));
  init_normal(token_embed_, rng, 0.02);
  for (std::size_t l = 0; l < cfg_.text_layers; ++l) {
    TextLayer layer;
    const std::string p = "text.layer" + std::to_string(l);
    auto add_linear = [&](const std::string& name, std::size_t in, std::size_t out) {
      LinearParams lp;
      lp.w = params_.add(name + ".w", Tensor::zeros({in, out}));
      init_glorot(lp.w, rng, in, out);
      lp.b = params_.add(name + ".b", Tensor::zeros({out}));
      return lp;
    };
    layer.ln1.gamma = params_.add(p + ".ln1.gamma", Tensor::full({cfg_.text_width}, 1.0));
    layer.ln1.beta = params_.add(p + ".ln1.beta", Tensor::zeros({cfg_.text_width}));
    layer.att.q = add_linear(p + ".att.q", cfg_.text_width, cfg_.text_width);
    layer.att.k = add_linear(p + ".att.k", cfg_.text_width, cfg_.text_width);
    layer.att.v = add_linear(p + ".att.v", cfg_.text_width, cfg_.text_width);
    layer.att.o = add_linear(p + ".att.o", cfg_.text_width, cfg_.text_width);
    layer.att.heads = cfg_.text_heads;
    layer.ln2.gamma = params_.add(p + ".ln2.gamma", Tensor::full({cfg_.text_width}, 1.0));
    layer.ln2.beta = params_.add(p + ".ln2.beta", Tensor::zeros({cfg_.text_width}));
    layer.ffn.l1 = add_linear(p + ".ffn.l1", cfg_.text_width, cfg_.text_ffn);
    layer.ffn.l2 = add_linear(p + ".ffn.l2", cfg_.text_ffn, cfg_.text_width);
    text_layers_.push_back(layer);
  }
  text_final_ln_.gamma = params_.add("text.final_ln.gamma", Tensor::full({cfg_.text_width}, 1.0));
  text_final_ln_.beta = params_.add("text.final_ln.beta", Tensor::zeros({cfg_.text_width}));
  text_proj_.w = params_.add("text.proj.w", Tensor::zeros({cfg_.text_width, cfg_.embed_dim}));
  init_glorot(text_proj_.w, rng, cfg_.text_width, cfg_.embed_dim);
  text_proj_.b = params_.add("text.proj.b", Tensor::zeros({cfg_.embed_dim}));

  log_temp_ = params_.add("log_temperature",
                          Tensor::scalar(std::log(cfg_.init_temperature)));
  posenc_ = sinusoidal_posenc(cfg_.max_text_len + 1, cfg_.text_width);
}

void BiEncoderModel::clamp_temperature() {
  auto v = log_temp_.raw();
  v[0] = std::max(v[0], std::log(cfg_.temperature_floor));
}

Tensor BiEncoderModel::conv_stack(const Tensor& x, bool training) {
  Tensor h = x;
  for (std::size_t i = 0; i < conv_.size(); ++i) {
    h = conv2d(h, conv_[i].w, conv_[i].b);
    h = batch_norm2d(h, conv_[i].gamma, conv_[i].beta, conv_[i].run_mean, conv_[i].run_var,
                     training, cfg_.bn_momentum, 1e-5);
    h = relu(h);
    if (i % 2 == 1) h = maxpool2x2(h);  // between every two blocks
  }
  return h;
}

Tensor BiEncoderModel::audio_embed(const AudioBatch& batch, bool training) {
  if (batch.f != cfg_.mel_bins)
    throw ShapeError("audio_embed: mel bins " + std::to_string(batch.f) +
                     " do not match model config " + std::to_string(cfg_.mel_bins));
  if (batch.t < cfg_.min_audio_frames())
    throw DegenerateInputError("audio_embed: " + std::to_string(batch.t) +
                               " frames is too short after pooling (need >= " +
                               std::to_string(cfg_.min_audio_frames()) + ")");
  Tensor x = Tensor::from_data({batch.n, 1, batch.t, batch.f}, batch.data);
  Tensor h = conv_stack(x, training);
  Tensor pooled = add(mean_hw(h), max_hw(h));  // [N, C]
  return linear(pooled, audio_proj_);
}

Tensor BiEncoderModel::text_stack_single(const Tensor& emb_with_pos, const Tensor& mask) {
  Tensor h = emb_with_pos;
  for (const auto& layer : text_layers_) {
    Tensor n1 = layer_norm(h, layer.ln1);
    h = add(h, multi_head_attention(n1, n1, layer.att, mask));
    h = add(h, feed_forward(layer_norm(h, layer.ln2), layer.ffn));
  }
  return h;
}

Tensor BiEncoderModel::text_embed(const std::vector<std::vector<std::size_t>>& token_rows,
                                  bool training) {
  (void)training;  // no dropout/batch statistics on the text path
  if (token_rows.empty()) throw DegenerateInputError("text_embed: empty batch");
  std::vector<Tensor> summaries;
  summaries.reserve(token_rows.size());
  for (const auto& row : token_rows) {
    if (row.empty()) throw DegenerateInputError("text_embed: empty token sequence");
    // effective length: trailing padding is masked out entirely
    std::size_t len = row.size();
    while (len > 0 && row[len - 1] == textproc::Vocabulary::kPad) --len;
    if (len == 0) throw DegenerateInputError("text_embed: all-padding token sequence");
    if (len > cfg_.max_text_len)
      throw ShapeError("text_embed: sequence length " + std::to_string(len) +
                       " exceeds max_text_len " + std::to_string(cfg_.max_text_len));

    std::vector<std::size_t> ids;
    ids.reserve(row.size() + 1);
    ids.push_back(textproc::Vocabulary::kBos);  // summary token
    for (std::size_t i = 0; i < row.size(); ++i) ids.push_back(row[i]);
    const std::size_t total = ids.size(), valid = len + 1;

    Tensor emb = embedding_rows(token_embed_, ids);
    Tensor pos = Tensor::from_data(
        {total, cfg_.text_width},
        std::vector<double>(posenc_.begin(),
                            posenc_.begin() + static_cast<std::ptrdiff_t>(total * cfg_.text_width)));
    Tensor h = add(emb, pos);

    Tensor mask;
    if (valid < total) {
      Tensor m = Tensor::zeros({total, total});
      auto mv = m.raw();
      for (std::size_t i = 0; i < total; ++i)
        for (std::size_t j = valid; j < total; ++j) mv[i * total + j] = kMaskValue;
      mask = m;
    }
    h = text_stack_single(h, mask);
    summaries.push_back(slice_rows(h, 0, 1));  // summary-token state
  }
  Tensor stacked = summaries.size() == 1 ? summaries[0] : concat_rows(summaries);
  return linear(layer_norm(stacked, text_final_ln_), text_proj_);
}

EmbeddingVector BiEncoderModel::encode_audio(const audiofront::MelSpectrogram& mel) {
  if (mel.config_fingerprint != cfg_.mel_fingerprint)
    throw ConfigError("encode_audio: mel config fingerprint " + hex64(mel.config_fingerprint) +
                      " does not match the model's training config " +
                      hex64(cfg_.mel_fingerprint));
  NoGradGuard ng;
  AudioBatch batch;
  batch.n = 1;
  batch.t = mel.num_frames;
  batch.f = mel.mel_bins;
  batch.data = mel.frames;
  Tensor e = audio_embed(batch, /*training=*/false);
  EmbeddingVector out;
  out.modality = EmbeddingVector::Modality::kAudio;
  out.values.assign(e.data().begin(), e.data().end());
  return out;
}

EmbeddingVector BiEncoderModel::encode_text(const textproc::TokenSequence& tokens) {
  NoGradGuard ng;
  Tensor e = text_embed({tokens.ids}, /*training=*/false);
  EmbeddingVector out;
  out.modality = EmbeddingVector::Modality::kText;
  out.values.assign(e.data().begin(), e.data().end());
  return out;
}

std::vector<std::vector<double>> embed_batch(
    BiEncoderModel& model, const std::vector<const audiofront::MelSpectrogram*>& mels) {
  std::vector<std::vector<double>> rows;
  rows.reserve(mels.size());
  for (const auto* mel : mels) rows.push_back(model.encode_audio(*mel).values);
  return rows;
}

std::vector<std::vector<double>> embed_batch(BiEncoderModel& model,
                                             const std::vector<const textproc::TokenSequence*>& seqs) {
  std::vector<std::vector<double>> rows;
  rows.reserve(seqs.size());
  for (const auto* s : seqs) rows.push_back(model.encode_text(*s).values);
  return rows;
}

AudioBatch make_audio_batch(const std::vector<const audiofront::MelSpectrogram*>& mels,
                            std::size_t crop_frames, Rng* crop_rng) {
  if (mels.empty()) throw DegenerateInputError("make_audio_batch: empty batch");
  const std::size_t f = mels[0]->mel_bins;
  AudioBatch batch;
  batch.n = mels.size();
  batch.t = crop_frames;
  batch.f = f;
  batch.data.assign(batch.n * crop_frames * f, 0.0);
  for (std::size_t i = 0; i < mels.size(); ++i) {
    const auto& mel = *mels[i];
    if (mel.mel_bins != f) throw ShapeError("make_audio_batch: inconsistent mel bins");
    std::size_t start = 0;
    std::size_t copy_t = std::min(crop_frames, mel.num_frames);
    if (mel.num_frames > crop_frames) {
      const std::size_t max_start = mel.num_frames - crop_frames;
      start = crop_rng ? static_cast<std::size_t>(
                             crop_rng->uniform_int(0, static_cast<std::int64_t>(max_start)))
                       : max_start / 2;
    }
    for (std::size_t t = 0; t < copy_t; ++t)
      std::copy_n(mel.frames.begin() + static_cast<std::ptrdiff_t>((start + t) * f), f,
                  batch.data.begin() + static_cast<std::ptrdiff_t>((i * crop_frames + t) * f));
    if (copy_t < crop_frames) {
      // short clips: pad the tail at the clip's own floor level
      double floor_val = mel.frames.empty() ? 0.0 : mel.frames[0];
      for (double v : mel.frames) floor_val = std::min(floor_val, v);
      std::fill(batch.data.begin() + static_cast<std::ptrdiff_t>((i * crop_frames + copy_t) * f),
                batch.data.begin() + static_cast<std::ptrdiff_t>((i + 1) * crop_frames * f),
                floor_val);
    }
  }
  return batch;
}

}  // namespace audiolab::encoders
