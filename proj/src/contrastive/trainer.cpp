// SPDX-License-Identifier: Apache-2.0

#include "audiolab/contrastive/trainer.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "audiolab/diffcore/adam.hpp"
#include "audiolab/evalsuite/metrics.hpp"

namespace audiolab::contrastive {

using namespace audiolab::diff;

PairDataset make_pair_dataset(const std::vector<const toygen::AudioTextExample*>& items,
                              audiofront::FeatureStore& features,
                              const textproc::Vocabulary& vocab) {
  PairDataset ds;
  ds.mels.reserve(items.size());
  ds.texts.reserve(items.size());
  for (const auto* it : items) {
    if (it->caption.empty())
      throw DataError("make_pair_dataset: item " + it->clip_id + " has no caption");
    ds.mels.push_back(&features.from_wav(it->clip_id, it->wav_path));
    ds.texts.push_back(textproc::tokenize(it->caption, vocab).ids);
  }
  return ds;
}

double retrieval_val_metric(encoders::BiEncoderModel& model, const PairDataset& val,
                            double* out_val_loss) {
  if (val.size() < 2) throw ConfigError("retrieval_val_metric: need >= 2 validation pairs");
  NoGradGuard ng;
  const std::size_t n = val.size();
  std::vector<std::vector<double>> a_rows, t_rows;
  a_rows.reserve(n);
  t_rows.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    a_rows.push_back(model.encode_audio(*val.mels[i]).values);
    textproc::TokenSequence seq;
    seq.ids = val.texts[i];
    t_rows.push_back(model.encode_text(seq).values);
  }
  const std::vector<double> s = cosine_scores(a_rows, t_rows);
  const double r1_at = evalsuite::recall_at_k(s, n, 1, evalsuite::Direction::kAudioToText);
  const double r1_ta = evalsuite::recall_at_k(s, n, 1, evalsuite::Direction::kTextToAudio);
  if (out_val_loss) {
    Tensor sim = Tensor::from_data({n, n}, s);
    *out_val_loss = infonce_loss(sim, model.temperature()).loss.item();
  }
  return 0.5 * (r1_at + r1_ta);
}

StageResult train_contrastive_stage(encoders::BiEncoderModel& model, const PairDataset& train,
                                    const PairDataset& val, const TrainConfig& cfg) {
  cfg.validate();
  if (train.size() < cfg.batch_size)
    throw ConfigError("train_contrastive_stage: corpus of " + std::to_string(train.size()) +
                      " pairs is smaller than batch size " + std::to_string(cfg.batch_size));

  Adam opt(model.params());
  Rng shuffle_rng(cfg.seed ^ 0x9a413c5b7e2f8d61ull);
  Rng crop_rng(cfg.seed ^ 0x17f3a9c2e5b8d401ull);

  StageResult result;
  std::vector<std::vector<double>> best_values;
  auto snapshot = [&]() {
    best_values.clear();
    for (auto& p : model.params().params())
      best_values.emplace_back(p.tensor.data().begin(), p.tensor.data().end());
    for (auto& b : model.params().buffers())
      best_values.emplace_back(b.tensor.data().begin(), b.tensor.data().end());
  };
  auto restore = [&]() {
    std::size_t k = 0;
    for (auto& p : model.params().params())
      std::copy(best_values[k].begin(), best_values[k].end(), p.tensor.raw().begin()), ++k;
    for (auto& b : model.params().buffers())
      std::copy(best_values[k].begin(), best_values[k].end(), b.tensor.raw().begin()), ++k;
  };

  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::size_t cursor = order.size();  // trigger shuffle on first use

  for (std::size_t iter = 1; iter <= cfg.total_iters; ++iter) {
    const double lr = lr_schedule(iter, cfg);

    std::vector<const audiofront::MelSpectrogram*> mels;
    std::vector<std::vector<std::size_t>> texts;
    mels.reserve(cfg.batch_size);
    texts.reserve(cfg.batch_size);
    for (std::size_t k = 0; k < cfg.batch_size; ++k) {
      if (cursor >= order.size()) {
        shuffle_rng.shuffle(order);
        cursor = 0;
      }
      const std::size_t idx = order[cursor++];
      mels.push_back(train.mels[idx]);
      texts.push_back(train.texts[idx]);
    }

    encoders::AudioBatch batch = encoders::make_audio_batch(mels, cfg.crop_frames, &crop_rng);
    Tensor a = model.audio_embed(batch, /*training=*/true);
    Tensor t = model.text_embed(texts, /*training=*/true);
    Tensor s = similarity_matrix(a, t);
    InfonceParts parts = infonce_loss_logtemp(s, model.log_temperature());

    model.params().zero_grads();
    parts.loss.backward();
    opt.step(lr);
    model.clamp_temperature();

    TraceRow row;
    row.iter = iter;
    row.loss = parts.loss.item();
    row.lr = lr;
    if (iter == 1) result.initial_loss = row.loss;

    if (!val.mels.empty() && (iter % cfg.validate_every == 0 || iter == cfg.total_iters)) {
      double vloss = 0.0;
      row.val_metric = retrieval_val_metric(model, val, &vloss);
      row.val_loss = vloss;
      const bool better = cfg.select_by == "loss" ? (result.best_metric < 0.0 ||
                                                     vloss < result.best_val_loss)
                                                  : row.val_metric > result.best_metric;
      if (better || best_values.empty()) {
        result.best_metric = row.val_metric;
        result.best_val_loss = vloss;
        result.best_iter = iter;
        snapshot();
      }
    }
    result.trace.push_back(row);
  }

  if (!best_values.empty()) restore();
  return result;
}

TwoStageArtifacts pretrain_two_stage(encoders::BiEncoderModel& model,
                                     const PairDataset& synthetic, const PairDataset& real_train,
                                     const PairDataset& real_val, const TrainConfig& stage1,
                                     const TrainConfig& stage2, const std::string& out_dir) {
  if (synthetic.size() == 0 || real_train.size() == 0)
    throw ConfigError("pretrain_two_stage: both corpora must be non-empty");
  std::filesystem::create_directories(out_dir);

  // stage-1 validation pairs randomly drawn from the synthetic data
  std::vector<std::size_t> idx(synthetic.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  Rng split_rng(stage1.seed ^ 0xb2f1d96c83a74e15ull);
  split_rng.shuffle(idx);
  const std::size_t n_val = std::min(stage1.val_pairs, synthetic.size() / 2);
  PairDataset syn_val, syn_train;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    PairDataset& dst = i < n_val ? syn_val : syn_train;
    dst.mels.push_back(synthetic.mels[idx[i]]);
    dst.texts.push_back(synthetic.texts[idx[i]]);
  }

  TwoStageArtifacts art;
  art.stage1 = train_contrastive_stage(model, syn_train, syn_val, stage1);
  art.stage1_ckpt = (std::filesystem::path(out_dir) / "stage1.ckpt").string();
  CheckpointMeta meta1;
  meta1.stage = "stage1";
  meta1.config = model.config().to_json();
  meta1.config_fingerprint = model.config().fingerprint();
  save_checkpoint(art.stage1_ckpt, model.params(), meta1);
  save_trace_csv((std::filesystem::path(out_dir) / "stage1_trace.csv").string(),
                 art.stage1.trace);

  // stage 2 continues from the stage-1 best checkpoint already restored in
  // the model
  art.stage2 = train_contrastive_stage(model, real_train, real_val, stage2);
  art.stage2_ckpt = (std::filesystem::path(out_dir) / "stage2.ckpt").string();
  CheckpointMeta meta2 = meta1;
  meta2.stage = "stage2";
  save_checkpoint(art.stage2_ckpt, model.params(), meta2);
  save_trace_csv((std::filesystem::path(out_dir) / "stage2_trace.csv").string(),
                 art.stage2.trace);
  return art;
}

void save_trace_csv(const std::string& path, const std::vector<TraceRow>& trace) {
  std::ofstream of(path);
  if (!of) throw ParseError("save_trace_csv: cannot open " + path + " for writing");
  of << "iter,loss,lr,val_metric\n";
  char buf[160];
  for (const auto& row : trace) {
    if (std::isnan(row.val_metric))
      std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,\n", row.iter, row.loss, row.lr);
    else
      std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g\n", row.iter, row.loss, row.lr,
                    row.val_metric);
    of << buf;
  }
}

}  // namespace audiolab::contrastive
