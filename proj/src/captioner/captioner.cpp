// SPDX-License-Identifier: Apache-2.0

#include "audiolab/captioner/captioner.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "audiolab/contrastive/contrastive.hpp"
#include "audiolab/diffcore/adam.hpp"

namespace audiolab::captioner {

using namespace audiolab::diff;
using textproc::Vocabulary;

nlohmann::json CaptionerConfig::to_json() const {
  return {{"feature_dim", feature_dim}, {"time_pool", time_pool},
          {"enc_hidden", enc_hidden},   {"enc_layers", enc_layers},
          {"dec_width", dec_width},     {"dec_layers", dec_layers},
          {"dec_heads", dec_heads},     {"dec_ffn", dec_ffn},
          {"max_len", max_len},         {"vocab_size", vocab_size},
          {"tag_vocab", tag_vocab},     {"mel_fingerprint", mel_fingerprint}};
}

CaptionerConfig CaptionerConfig::from_json(const nlohmann::json& j) {
  CaptionerConfig c;
  c.feature_dim = j.at("feature_dim").get<std::size_t>();
  c.time_pool = j.at("time_pool").get<std::size_t>();
  c.enc_hidden = j.at("enc_hidden").get<std::size_t>();
  c.enc_layers = j.at("enc_layers").get<std::size_t>();
  c.dec_width = j.at("dec_width").get<std::size_t>();
  c.dec_layers = j.at("dec_layers").get<std::size_t>();
  c.dec_heads = j.at("dec_heads").get<std::size_t>();
  c.dec_ffn = j.at("dec_ffn").get<std::size_t>();
  c.max_len = j.at("max_len").get<std::size_t>();
  c.vocab_size = j.at("vocab_size").get<std::size_t>();
  c.tag_vocab = j.at("tag_vocab").get<std::vector<std::string>>();
  c.mel_fingerprint = j.at("mel_fingerprint").get<std::uint64_t>();
  return c;
}

std::uint64_t CaptionerConfig::fingerprint() const { return fnv1a64(to_json().dump()); }

CaptionModel::CaptionModel(CaptionerConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
  if (cfg_.vocab_size < 4) throw ConfigError("CaptionModel: vocab_size must include reserved tokens");
  if (cfg_.tag_vocab.empty()) throw ConfigError("CaptionModel: empty tag vocabulary");
  if (cfg_.dec_width % cfg_.dec_heads != 0)
    throw ConfigError("CaptionModel: dec_width must be divisible by dec_heads");
  if (cfg_.time_pool == 0) throw ConfigError("CaptionModel: time_pool must be >= 1");

  Rng rng(seed);
  auto add_linear = [&](const std::string& name, std::size_t in, std::size_t out) {
    LinearParams lp;
    lp.w = params_.add(name + ".w", Tensor::zeros({in, out}));
    init_glorot(lp.w, rng, in, out);
    lp.b = params_.add(name + ".b", Tensor::zeros({out}));
    return lp;
  };
  auto add_gru = [&](const std::string& name, std::size_t in, std::size_t hidden) {
    GruParams g;
    g.hidden = hidden;
    g.wx = params_.add(name + ".wx", Tensor::zeros({in, 3 * hidden}));
    init_glorot(g.wx, rng, in, 3 * hidden);
    g.wh = params_.add(name + ".wh", Tensor::zeros({hidden, 3 * hidden}));
    init_glorot(g.wh, rng, hidden, 3 * hidden);
    g.bx = params_.add(name + ".bx", Tensor::zeros({3 * hidden}));
    g.bh = params_.add(name + ".bh", Tensor::zeros({3 * hidden}));
    return g;
  };

  std::size_t in_dim = cfg_.feature_dim;
  for (std::size_t l = 0; l < cfg_.enc_layers; ++l) {
    BiGru bg;
    const std::string p = "enc.gru" + std::to_string(l);
    bg.fwd = add_gru(p + ".fwd", in_dim, cfg_.enc_hidden);
    bg.bwd = add_gru(p + ".bwd", in_dim, cfg_.enc_hidden);
    enc_layers_.push_back(bg);
    in_dim = 2 * cfg_.enc_hidden;
  }
  enc_proj_ = add_linear("enc.proj", in_dim, cfg_.dec_width);

  we_ = params_.add("dec.we", Tensor::zeros({cfg_.vocab_size, cfg_.dec_width}));
  init_normal(we_, rng, 0.02);
  te_ = params_.add("dec.te", Tensor::zeros({cfg_.tag_vocab.size(), cfg_.dec_width}));
  init_normal(te_, rng, 0.02);

  for (std::size_t l = 0; l < cfg_.dec_layers; ++l) {
    DecLayer dl;
    const std::string p = "dec.layer" + std::to_string(l);
    auto add_ln = [&](const std::string& name) {
      LayerNormParams ln;
      ln.gamma = params_.add(name + ".gamma", Tensor::full({cfg_.dec_width}, 1.0));
      ln.beta = params_.add(name + ".beta", Tensor::zeros({cfg_.dec_width}));
      return ln;
    };
    dl.ln1 = add_ln(p + ".ln1");
    dl.self_att.q = add_linear(p + ".self.q", cfg_.dec_width, cfg_.dec_width);
    dl.self_att.k = add_linear(p + ".self.k", cfg_.dec_width, cfg_.dec_width);
    dl.self_att.v = add_linear(p + ".self.v", cfg_.dec_width, cfg_.dec_width);
    dl.self_att.o = add_linear(p + ".self.o", cfg_.dec_width, cfg_.dec_width);
    dl.self_att.heads = cfg_.dec_heads;
    dl.ln2 = add_ln(p + ".ln2");
    dl.cross_att.q = add_linear(p + ".cross.q", cfg_.dec_width, cfg_.dec_width);
    dl.cross_att.k = add_linear(p + ".cross.k", cfg_.dec_width, cfg_.dec_width);
    dl.cross_att.v = add_linear(p + ".cross.v", cfg_.dec_width, cfg_.dec_width);
    dl.cross_att.o = add_linear(p + ".cross.o", cfg_.dec_width, cfg_.dec_width);
    dl.cross_att.heads = cfg_.dec_heads;
    dl.ln3 = add_ln(p + ".ln3");
    dl.ffn.l1 = add_linear(p + ".ffn.l1", cfg_.dec_width, cfg_.dec_ffn);
    dl.ffn.l2 = add_linear(p + ".ffn.l2", cfg_.dec_ffn, cfg_.dec_width);
    dec_layers_.push_back(dl);
  }
  dec_final_ln_.gamma = params_.add("dec.final_ln.gamma", Tensor::full({cfg_.dec_width}, 1.0));
  dec_final_ln_.beta = params_.add("dec.final_ln.beta", Tensor::zeros({cfg_.dec_width}));
  out_proj_ = add_linear("dec.out", cfg_.dec_width, cfg_.vocab_size);
  posenc_ = sinusoidal_posenc(cfg_.max_len + 1, cfg_.dec_width);
}

std::size_t CaptionModel::tag_index(const std::string& tag) const {
  for (std::size_t i = 0; i < cfg_.tag_vocab.size(); ++i)
    if (cfg_.tag_vocab[i] == tag) return i;
  throw LookupError("CaptionModel: unknown tag " + tag);
}

std::vector<double> CaptionModel::prepare_features(const audiofront::MelSpectrogram& mel,
                                                   std::size_t* out_frames) const {
  if (mel.config_fingerprint != cfg_.mel_fingerprint)
    throw ConfigError("CaptionModel: mel config fingerprint mismatch");
  if (mel.mel_bins != cfg_.feature_dim)
    throw ShapeError("CaptionModel: feature dim " + std::to_string(mel.mel_bins) +
                     " != configured " + std::to_string(cfg_.feature_dim));
  const std::size_t pooled = std::max<std::size_t>(1, mel.num_frames / cfg_.time_pool);
  std::vector<double> out(pooled * cfg_.feature_dim, 0.0);
  for (std::size_t t = 0; t < pooled; ++t) {
    const std::size_t lo = t * cfg_.time_pool;
    const std::size_t hi = std::min(mel.num_frames, lo + cfg_.time_pool);
    for (std::size_t g = lo; g < hi; ++g)
      for (std::size_t f = 0; f < cfg_.feature_dim; ++f)
        out[t * cfg_.feature_dim + f] += mel.frames[g * cfg_.feature_dim + f];
    for (std::size_t f = 0; f < cfg_.feature_dim; ++f)
      out[t * cfg_.feature_dim + f] /= static_cast<double>(hi - lo);
  }
  if (out_frames) *out_frames = pooled;
  return out;
}

diff::Tensor CaptionModel::encode_batch(const std::vector<std::vector<double>>& features,
                                        std::size_t frames, std::size_t* out_frames) {
  const std::size_t b = features.size();
  if (b == 0) throw DegenerateInputError("encode_batch: empty batch");
  // time-major leaf [T*B, F]
  std::vector<double> tm(frames * b * cfg_.feature_dim, 0.0);
  for (std::size_t i = 0; i < b; ++i) {
    if (features[i].size() != frames * cfg_.feature_dim)
      throw ShapeError("encode_batch: item " + std::to_string(i) + " has inconsistent frames");
    for (std::size_t t = 0; t < frames; ++t)
      std::copy_n(features[i].begin() + static_cast<std::ptrdiff_t>(t * cfg_.feature_dim),
                  cfg_.feature_dim,
                  tm.begin() + static_cast<std::ptrdiff_t>((t * b + i) * cfg_.feature_dim));
  }
  Tensor h = Tensor::from_data({frames * b, cfg_.feature_dim}, std::move(tm));
  for (const auto& layer : enc_layers_) h = bigru_layer(h, frames, b, layer.fwd, layer.bwd);
  h = linear(h, enc_proj_);  // [T*B, d]
  // batch-major conversion so each item's states are contiguous
  std::vector<std::size_t> index(frames * b);
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t t = 0; t < frames; ++t) index[i * frames + t] = t * b + i;
  if (out_frames) *out_frames = frames;
  return permute_rows(h, index);
}

diff::Tensor CaptionModel::encode_clip(const audiofront::MelSpectrogram& mel) {
  NoGradGuard ng;
  std::size_t frames = 0;
  std::vector<double> feats = prepare_features(mel, &frames);
  return encode_batch({feats}, frames, nullptr);
}

diff::Tensor CaptionModel::fuse_tags(const std::vector<std::string>& tags) {
  if (tags.empty()) throw DegenerateInputError("fuse_tags: empty tag set");
  std::vector<std::size_t> idx;
  idx.reserve(tags.size());
  for (const auto& t : tags) idx.push_back(tag_index(t));
  std::sort(idx.begin(), idx.end());  // canonical order: mean is order-independent
  return col_mean(embedding_rows(te_, idx));
}

diff::Tensor CaptionModel::decoder_logits(const diff::Tensor& enc_states,
                                          const std::vector<std::size_t>& input_tokens,
                                          const diff::Tensor& tag_embedding) {
  const std::size_t l = input_tokens.size();
  if (l == 0) throw DegenerateInputError("decoder_logits: empty input");
  if (input_tokens[0] != Vocabulary::kBos)
    throw DataError("decoder_logits: decoded prefix must start with <BOS>");
  for (std::size_t t : input_tokens)
    if (t == Vocabulary::kPad) throw DataError("decoder_logits: <PAD> inside the decoder input");
  if (l > cfg_.max_len + 1)
    throw ShapeError("decoder_logits: input length " + std::to_string(l) + " exceeds max_len");

  Tensor emb = embedding_rows(we_, input_tokens);
  // the same e^g is added at every position, <BOS> included
  emb = add(emb, repeat_row(tag_embedding, l));
  Tensor pos = Tensor::from_data(
      {l, cfg_.dec_width},
      std::vector<double>(posenc_.begin(),
                          posenc_.begin() + static_cast<std::ptrdiff_t>(l * cfg_.dec_width)));
  Tensor h = add(emb, pos);
  Tensor cmask = causal_mask(l);
  for (const auto& layer : dec_layers_) {
    Tensor n1 = layer_norm(h, layer.ln1);
    h = add(h, multi_head_attention(n1, n1, layer.self_att, cmask));
    h = add(h, multi_head_attention(layer_norm(h, layer.ln2), enc_states, layer.cross_att));
    h = add(h, feed_forward(layer_norm(h, layer.ln3), layer.ffn));
  }
  return linear(layer_norm(h, dec_final_ln_), out_proj_);
}

std::vector<double> CaptionModel::decode_step(const diff::Tensor& enc_states,
                                              const std::vector<std::size_t>& prefix_with_bos,
                                              const diff::Tensor& tag_embedding) {
  NoGradGuard ng;
  Tensor logits = decoder_logits(enc_states, prefix_with_bos, tag_embedding);
  Tensor probs = softmax_rows(logits);
  const std::size_t l = prefix_with_bos.size();
  std::vector<double> out(cfg_.vocab_size);
  std::copy_n(probs.data().begin() + static_cast<std::ptrdiff_t>((l - 1) * cfg_.vocab_size),
              cfg_.vocab_size, out.begin());
  return out;
}

BeamHypothesis CaptionModel::caption_clip(const audiofront::MelSpectrogram& mel,
                                          const std::vector<std::string>& tags,
                                          std::size_t beam_size) {
  NoGradGuard ng;
  Tensor enc = encode_clip(mel);
  Tensor eg = fuse_tags(tags);
  auto step = [&](const std::vector<std::size_t>& prefix) {
    std::vector<std::size_t> with_bos;
    with_bos.reserve(prefix.size() + 1);
    with_bos.push_back(Vocabulary::kBos);
    for (std::size_t t : prefix) with_bos.push_back(t);
    std::vector<double> probs = decode_step(enc, with_bos, eg);
    // the decoder must not emit PAD or BOS; an empty caption (EOS first) is
    // also ruled out
    probs[Vocabulary::kPad] = 0.0;
    probs[Vocabulary::kBos] = 0.0;
    if (prefix.empty()) probs[Vocabulary::kEos] = 0.0;
    std::vector<double> lp(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i)
      lp[i] = probs[i] > 0.0 ? std::log(probs[i]) : -1e30;
    return lp;
  };
  return beam_search(step, cfg_.vocab_size, Vocabulary::kEos, beam_size, cfg_.max_len);
}

diff::Tensor word_ce_loss(const diff::Tensor& logits, const std::vector<std::size_t>& targets,
                          const std::vector<double>& token_mask) {
  if (logits.dim(0) != targets.size() || targets.size() != token_mask.size())
    throw ShapeError("word_ce_loss: logits rows, targets and mask must align");
  double denom = 0.0;
  for (double m : token_mask) denom += m;
  if (denom <= 0.0) throw DegenerateInputError("word_ce_loss: no unmasked tokens");
  Tensor logp = gather_cols(log_softmax_rows(logits), targets);
  Tensor mask = Tensor::from_data({token_mask.size()}, token_mask);
  return scale(sum_all(mul(logp, mask)), -1.0 / denom);
}

namespace {

std::vector<std::size_t> caption_targets(const std::string& caption,
                                         const textproc::Vocabulary& vocab,
                                         std::size_t max_len) {
  textproc::TokenSequence seq = textproc::tokenize(caption, vocab);
  if (seq.ids.size() > max_len - 1) seq.ids.resize(max_len - 1);
  seq.ids.push_back(Vocabulary::kEos);
  return seq.ids;
}

double captioner_lr(std::size_t step, std::size_t total, const CaptionTrainConfig& cfg) {
  const std::size_t warmup =
      std::max<std::size_t>(1, static_cast<std::size_t>(cfg.warmup_frac * static_cast<double>(total)));
  if (step < warmup) return cfg.peak_lr * static_cast<double>(step) / static_cast<double>(warmup);
  if (total <= warmup) return cfg.peak_lr;
  const double progress =
      static_cast<double>(step - warmup) / static_cast<double>(total - warmup);
  return cfg.peak_lr * std::pow(cfg.end_lr / cfg.peak_lr, progress);
}

std::vector<double> crop_features(const audiofront::MelSpectrogram& mel,
                                  const CaptionModel& model, std::size_t crop_frames, Rng* rng) {
  // crop in raw-frame space, then pool
  audiofront::MelSpectrogram view;
  view.mel_bins = mel.mel_bins;
  view.config_fingerprint = mel.config_fingerprint;
  view.frame_rate = mel.frame_rate;
  std::size_t start = 0;
  const std::size_t t = std::min(crop_frames, mel.num_frames);
  if (mel.num_frames > crop_frames) {
    const std::size_t max_start = mel.num_frames - crop_frames;
    start = rng ? static_cast<std::size_t>(rng->uniform_int(0, static_cast<std::int64_t>(max_start)))
                : max_start / 2;
  }
  view.num_frames = crop_frames;
  view.frames.assign(crop_frames * mel.mel_bins, 0.0);
  std::copy_n(mel.frames.begin() + static_cast<std::ptrdiff_t>(start * mel.mel_bins),
              t * mel.mel_bins, view.frames.begin());
  if (t < crop_frames) {
    double floor_val = mel.frames.empty() ? 0.0 : mel.frames[0];
    for (double v : mel.frames) floor_val = std::min(floor_val, v);
    std::fill(view.frames.begin() + static_cast<std::ptrdiff_t>(t * mel.mel_bins),
              view.frames.end(), floor_val);
  }
  return model.prepare_features(view, nullptr);
}

}  // namespace

double validation_ce(CaptionModel& model,
                     const std::vector<const toygen::AudioTextExample*>& items,
                     audiofront::FeatureStore& features, const textproc::Vocabulary& vocab) {
  if (items.empty()) throw ConfigError("validation_ce: empty item list");
  NoGradGuard ng;
  double total_nll = 0.0;
  double total_tokens = 0.0;
  for (const auto* it : items) {
    const auto& mel = features.from_wav(it->clip_id, it->wav_path);
    Tensor enc = model.encode_clip(mel);
    Tensor eg = model.fuse_tags(it->tags);
    std::vector<std::size_t> targets = caption_targets(it->caption, vocab, model.config().max_len);
    std::vector<std::size_t> inputs;
    inputs.push_back(Vocabulary::kBos);
    for (std::size_t i = 0; i + 1 < targets.size(); ++i) inputs.push_back(targets[i]);
    Tensor logits = model.decoder_logits(enc, inputs, eg);
    Tensor loss = word_ce_loss(logits, targets, std::vector<double>(targets.size(), 1.0));
    total_nll += loss.item() * static_cast<double>(targets.size());
    total_tokens += static_cast<double>(targets.size());
  }
  return total_nll / total_tokens;
}

CaptionTrainResult train_captioner(CaptionModel& model,
                                   const std::vector<const toygen::AudioTextExample*>& train,
                                   const std::vector<const toygen::AudioTextExample*>& val,
                                   audiofront::FeatureStore& features,
                                   const textproc::Vocabulary& vocab,
                                   const CaptionTrainConfig& cfg) {
  if (train.empty()) throw ConfigError("train_captioner: empty training corpus");
  for (const auto* it : train)
    if (it->caption.empty())
      throw DataError("train_captioner: item " + it->clip_id + " has no caption");
  const std::size_t batch = std::min(cfg.batch_size, train.size());
  const std::size_t steps_per_epoch = std::max<std::size_t>(1, train.size() / batch);
  const std::size_t total_steps = cfg.epochs * steps_per_epoch;

  Adam opt(model.params());
  Rng shuffle_rng(cfg.seed ^ 0x5eedcafe12345678ull);
  Rng crop_rng(cfg.seed ^ 0x0dd5eed987654321ull);

  CaptionTrainResult result;
  result.best_val_ce = std::numeric_limits<double>::infinity();

  // snapshot for best-checkpoint restore
  std::vector<std::vector<double>> best_params;
  auto snapshot = [&]() {
    best_params.clear();
    for (auto& p : model.params().params())
      best_params.emplace_back(p.tensor.data().begin(), p.tensor.data().end());
  };
  auto restore = [&]() {
    for (std::size_t i = 0; i < best_params.size(); ++i)
      std::copy(best_params[i].begin(), best_params[i].end(),
                model.params().params()[i].tensor.raw().begin());
  };

  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  diff::Tensor* te = model.params().find("dec.te");
  if (cfg.freeze_tag_embedding && te)
    std::fill(te->raw().begin(), te->raw().end(), 0.0);  // zero-TE ablation
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    for (std::size_t bstart = 0; bstart + batch <= order.size(); bstart += batch) {
      ++step;
      const double lr = captioner_lr(step, total_steps, cfg);

      std::vector<std::vector<double>> feats;
      feats.reserve(batch);
      std::vector<const toygen::AudioTextExample*> items;
      for (std::size_t k = 0; k < batch; ++k) {
        const auto* it = train[order[bstart + k]];
        items.push_back(it);
        feats.push_back(crop_features(features.from_wav(it->clip_id, it->wav_path), model,
                                      cfg.crop_frames, cfg.random_crops ? &crop_rng : nullptr));
      }
      const std::size_t pooled = cfg.crop_frames / std::max<std::size_t>(1, model.config().time_pool);
      Tensor enc = model.encode_batch(feats, std::max<std::size_t>(1, pooled), nullptr);

      // per-item decoding against the item's contiguous state block
      double total_tokens = 0.0;
      std::vector<Tensor> losses;
      for (std::size_t k = 0; k < batch; ++k) {
        const auto* it = items[k];
        Tensor enc_k = slice_rows(enc, k * std::max<std::size_t>(1, pooled),
                                  std::max<std::size_t>(1, pooled));
        Tensor eg = model.fuse_tags(it->tags);
        std::vector<std::size_t> targets =
            caption_targets(it->caption, vocab, model.config().max_len);
        std::vector<std::size_t> inputs;
        inputs.push_back(Vocabulary::kBos);
        for (std::size_t i = 0; i + 1 < targets.size(); ++i) inputs.push_back(targets[i]);
        Tensor logits = model.decoder_logits(enc_k, inputs, eg);
        Tensor logp = gather_cols(log_softmax_rows(logits), targets);
        losses.push_back(neg(sum_all(logp)));
        total_tokens += static_cast<double>(targets.size());
      }
      Tensor sum_loss = losses[0];
      for (std::size_t k = 1; k < losses.size(); ++k) sum_loss = add(sum_loss, losses[k]);
      Tensor loss = scale(sum_loss, 1.0 / total_tokens);

      model.params().zero_grads();
      loss.backward();
      if (cfg.freeze_tag_embedding && te)
        std::fill(te->grad_raw().begin(), te->grad_raw().end(), 0.0);
      opt.step(lr);
      result.trace.push_back({step, loss.item(), lr});
    }

    const double val_ce = val.empty() ? result.trace.back().loss
                                      : validation_ce(model, val, features, vocab);
    result.epoch_val_ce.push_back(val_ce);
    if (val_ce < result.best_val_ce) {
      result.best_val_ce = val_ce;
      result.best_epoch = epoch;
      snapshot();
    }
  }
  if (!best_params.empty()) restore();
  return result;
}

std::vector<diff::NamedGradCheck> ce_gradient_checks(std::uint64_t seed) {
  std::vector<diff::NamedGradCheck> checks;
  Rng master(seed);
  struct Dims {
    std::size_t rows, vocab;
  };
  const Dims dims[3] = {{3, 5}, {5, 8}, {2, 11}};
  for (int s = 0; s < 3; ++s) {
    Rng rng = master.fork(static_cast<std::uint64_t>(s));
    Tensor logits = Tensor::zeros({dims[s].rows, dims[s].vocab}, true);
    for (auto& v : logits.raw()) v = 3.0 * (rng.uniform() - 0.5);
    std::vector<std::size_t> targets;
    std::vector<double> mask;
    for (std::size_t r = 0; r < dims[s].rows; ++r) {
      targets.push_back(static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<std::int64_t>(dims[s].vocab) - 1)));
      mask.push_back(1.0);
    }
    checks.push_back({"word-ce/" + std::to_string(s),
                      [logits, targets, mask](double eps, double tol) {
                        auto f = [&targets, &mask](const std::vector<Tensor>& v) {
                          return word_ce_loss(v[0], targets, mask);
                        };
                        return diff::gradient_check(f, {logits}, eps, tol, {"logits"});
                      }});
  }
  return checks;
}

void save_caption_model(const std::string& path, const CaptionModel& model,
                        const std::string& stage) {
  contrastive::CheckpointMeta meta;
  meta.stage = stage;
  meta.config = model.config().to_json();
  meta.config_fingerprint = model.config().fingerprint();
  contrastive::save_checkpoint(path, model.params(), meta);
}

CaptionModel load_caption_model(const std::string& path) {
  contrastive::CheckpointMeta meta = contrastive::read_checkpoint_meta(path);
  CaptionModel model(CaptionerConfig::from_json(meta.config), /*seed=*/0);
  contrastive::load_checkpoint(path, model.params());
  return model;
}

}  // namespace audiolab::captioner
