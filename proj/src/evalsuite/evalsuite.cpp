// SPDX-License-Identifier: Apache-2.0

#include "audiolab/evalsuite/evalsuite.hpp"

#include <cmath>
#include <fstream>

#include "audiolab/diffcore/adam.hpp"
#include "audiolab/textproc/text.hpp"

namespace audiolab::evalsuite {

using namespace audiolab::diff;

nlohmann::json MetricReport::to_json() const {
  nlohmann::json j;
  j["task"] = task;
  j["dataset_id"] = dataset_id;
  j["checkpoint_id"] = checkpoint_id;
  j["seed"] = seed;
  j["metrics"] = metrics;
  j["wall_clock_sec"] = wall_clock_sec;
  return j;
}

MetricReport MetricReport::from_json(const nlohmann::json& j) {
  MetricReport r;
  r.task = j.at("task").get<std::string>();
  r.dataset_id = j.value("dataset_id", std::string());
  r.checkpoint_id = j.value("checkpoint_id", std::string());
  r.seed = j.value("seed", std::uint64_t(0));
  r.metrics = j.at("metrics").get<std::map<std::string, double>>();
  r.wall_clock_sec = j.value("wall_clock_sec", 0.0);
  return r;
}

std::uint64_t MetricReport::stable_digest() const {
  nlohmann::json j = to_json();
  j.erase("wall_clock_sec");
  return fnv1a64(j.dump());
}

void MetricReport::save(const std::string& path) const {
  std::ofstream of(path);
  if (!of) throw ParseError("MetricReport: cannot open " + path + " for writing");
  of << to_json().dump(2) << "\n";
}

MetricReport MetricReport::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("MetricReport: cannot open " + path);
  nlohmann::json j;
  in >> j;
  return from_json(j);
}

ZeroShotResult zero_shot_from_embeddings(const std::vector<std::vector<double>>& clip_rows,
                                         const std::vector<std::vector<double>>& label_rows) {
  if (label_rows.empty()) throw ConfigError("zero_shot: no labels");
  ZeroShotResult out;
  out.n_clips = clip_rows.size();
  out.n_labels = label_rows.size();
  out.scores = contrastive::cosine_scores(clip_rows, label_rows);
  out.predictions.resize(clip_rows.size());
  for (std::size_t i = 0; i < clip_rows.size(); ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < label_rows.size(); ++j)
      if (out.scores[i * label_rows.size() + j] > out.scores[i * label_rows.size() + best])
        best = j;
    out.predictions[i] = best;
  }
  return out;
}

ZeroShotResult zero_shot_classify(encoders::BiEncoderModel& model,
                                  const std::vector<const audiofront::MelSpectrogram*>& clips,
                                  const std::vector<std::string>& labels,
                                  const textproc::Vocabulary& vocab) {
  if (labels.empty()) throw ConfigError("zero_shot_classify: no labels");
  NoGradGuard ng;
  // each textual label is encoded exactly once
  std::vector<std::vector<double>> label_rows;
  label_rows.reserve(labels.size());
  for (const auto& label : labels) {
    textproc::TokenSequence seq = textproc::tokenize(textproc::label_to_text(label), vocab);
    label_rows.push_back(model.encode_text(seq).values);
  }
  std::vector<std::vector<double>> clip_rows;
  clip_rows.reserve(clips.size());
  for (const auto* mel : clips) clip_rows.push_back(model.encode_audio(*mel).values);
  return zero_shot_from_embeddings(clip_rows, label_rows);
}

Tensor multi_label_bce(const Tensor& logits, const Tensor& targets) {
  if (logits.shape() != targets.shape())
    throw ShapeError("multi_label_bce: logits/targets shape mismatch");
  return mean_all(sub(softplus(logits), mul(logits, targets)));
}

double accuracy(const std::vector<std::size_t>& predictions,
                const std::vector<std::size_t>& truths) {
  if (predictions.size() != truths.size() || predictions.empty())
    throw ShapeError("accuracy: prediction/truth size mismatch");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) hits += predictions[i] == truths[i];
  return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

namespace {

// frozen-encoder features, one row per clip
Tensor probe_features(encoders::BiEncoderModel& encoder,
                      const std::vector<const audiofront::MelSpectrogram*>& clips) {
  NoGradGuard ng;
  std::vector<double> rows;
  std::size_t dim = 0;
  for (const auto* mel : clips) {
    auto e = encoder.encode_audio(*mel);
    dim = e.values.size();
    rows.insert(rows.end(), e.values.begin(), e.values.end());
  }
  return Tensor::from_data({clips.size(), dim}, std::move(rows));
}

Tensor head_loss(const Tensor& logits, const std::vector<std::vector<int>>& label_rows,
                 ClassifierConfig::Task task, const std::vector<std::size_t>& subset) {
  const std::size_t classes = logits.dim(1);
  if (task == ClassifierConfig::Task::kSingleLabel) {
    std::vector<std::size_t> targets;
    targets.reserve(subset.size());
    for (std::size_t idx : subset) {
      std::size_t label = classes;
      for (std::size_t c = 0; c < label_rows[idx].size(); ++c)
        if (label_rows[idx][c] != 0) {
          label = c;
          break;
        }
      if (label >= classes)
        throw DataError("train_classifier: item " + std::to_string(idx) +
                        " lacks a label inside the class range");
      targets.push_back(label);
    }
    return neg(mean_all(gather_cols(log_softmax_rows(logits), targets)));
  }
  // multi-label BCE with logits: mean(softplus(x) - x * y)
  std::vector<double> y;
  y.reserve(subset.size() * classes);
  for (std::size_t idx : subset)
    for (std::size_t c = 0; c < classes; ++c) {
      if (c < label_rows[idx].size() && label_rows[idx][c] != 0 && label_rows[idx][c] != 1)
        throw DataError("train_classifier: multi-label targets must be 0/1");
      y.push_back(c < label_rows[idx].size() ? static_cast<double>(label_rows[idx][c]) : 0.0);
    }
  Tensor targets = Tensor::from_data({subset.size(), classes}, std::move(y));
  return multi_label_bce(logits, targets);
}

}  // namespace

TrainedClassifier train_classifier(encoders::BiEncoderModel& encoder,
                                   const std::vector<const audiofront::MelSpectrogram*>& clips,
                                   const std::vector<std::vector<int>>& label_rows,
                                   const ClassifierConfig& cfg) {
  if (clips.empty() || clips.size() != label_rows.size())
    throw DataError("train_classifier: clips and labels must align");
  if (cfg.classes == 0) throw ConfigError("train_classifier: classes must be set");
  for (const auto& row : label_rows)
    if (row.size() != cfg.classes)
      throw DataError("train_classifier: label row width does not match class count");

  Rng rng(cfg.seed);
  TrainedClassifier head;
  diff::ParamStore head_store;
  head.fc.w = head_store.add("fc.w", Tensor::zeros({encoder.config().embed_dim, cfg.classes}));
  init_glorot(head.fc.w, rng, encoder.config().embed_dim, cfg.classes);
  head.fc.b = head_store.add("fc.b", Tensor::zeros({cfg.classes}));

  std::vector<std::size_t> all(clips.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;

  if (cfg.mode == ClassifierConfig::Mode::kLinearProbe) {
    // features are extracted once; only the head trains
    Tensor feats = probe_features(encoder, clips);
    Adam opt(head_store);
    for (std::size_t step = 0; step < cfg.steps; ++step) {
      Tensor loss = head_loss(linear(feats, head.fc), label_rows, cfg.task, all);
      head_store.zero_grads();
      loss.backward();
      opt.step(cfg.lr);
      head.loss_trace.push_back(loss.item());
    }
    return head;
  }

  // fine-tune: encoder parameters join the optimizer
  diff::ParamStore joint;
  for (auto& p : encoder.params().params()) joint.add(p.name, p.tensor);
  joint.add("fc.w", head.fc.w);
  joint.add("fc.b", head.fc.b);
  Adam opt(joint);
  Rng batch_rng(cfg.seed ^ 0x77aa55cc11dd22eeull);
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    std::vector<std::size_t> subset;
    std::vector<const audiofront::MelSpectrogram*> mels;
    for (std::size_t k = 0; k < std::min(cfg.batch_size, clips.size()); ++k) {
      const std::size_t idx = static_cast<std::size_t>(
          batch_rng.uniform_int(0, static_cast<std::int64_t>(clips.size()) - 1));
      subset.push_back(idx);
      mels.push_back(clips[idx]);
    }
    encoders::AudioBatch batch = encoders::make_audio_batch(mels, cfg.crop_frames, &batch_rng);
    Tensor emb = encoder.audio_embed(batch, /*training=*/true);
    Tensor loss = head_loss(linear(emb, head.fc), label_rows, cfg.task, subset);
    joint.zero_grads();
    loss.backward();
    opt.step(cfg.lr);
    head.loss_trace.push_back(loss.item());
  }
  return head;
}

std::vector<double> classifier_scores(encoders::BiEncoderModel& encoder,
                                      const TrainedClassifier& head,
                                      const std::vector<const audiofront::MelSpectrogram*>& clips) {
  NoGradGuard ng;
  Tensor feats = probe_features(encoder, clips);
  Tensor logits = linear(feats, head.fc);
  return {logits.data().begin(), logits.data().end()};
}

MetricReport eval_retrieval(encoders::BiEncoderModel& model,
                            const contrastive::PairDataset& pairs, const std::string& dataset_id) {
  NoGradGuard ng;
  const std::size_t n = pairs.size();
  if (n < 2) throw ConfigError("eval_retrieval: need >= 2 pairs");
  std::vector<std::vector<double>> a_rows, t_rows;
  for (std::size_t i = 0; i < n; ++i) {
    a_rows.push_back(model.encode_audio(*pairs.mels[i]).values);
    textproc::TokenSequence seq;
    seq.ids = pairs.texts[i];
    t_rows.push_back(model.encode_text(seq).values);
  }
  const std::vector<double> s = contrastive::cosine_scores(a_rows, t_rows);
  MetricReport report;
  report.task = "retrieval";
  report.dataset_id = dataset_id;
  for (std::size_t k : {std::size_t(1), std::size_t(5), std::size_t(10)}) {
    if (k > n) continue;
    report.metrics["r@" + std::to_string(k) + "_a2t"] =
        recall_at_k(s, n, k, Direction::kAudioToText);
    report.metrics["r@" + std::to_string(k) + "_t2a"] =
        recall_at_k(s, n, k, Direction::kTextToAudio);
  }
  return report;
}

FinetuneResult finetune_retrieval(encoders::BiEncoderModel& model,
                                  const contrastive::PairDataset& train,
                                  const contrastive::PairDataset& val,
                                  const contrastive::PairDataset& test,
                                  const FinetuneRetrievalConfig& cfg) {
  const std::size_t batch = std::min(cfg.batch_size, std::max<std::size_t>(train.size(), 1));
  const std::size_t steps_per_epoch = std::max<std::size_t>(1, train.size() / std::max<std::size_t>(batch, 1));
  contrastive::TrainConfig tc;
  tc.batch_size = batch;
  tc.total_iters = cfg.epochs * steps_per_epoch;
  tc.warmup_iters = cfg.epochs == 0 ? 0 : steps_per_epoch;  // warm up across the first epoch
  tc.max_lr = cfg.max_lr;
  tc.validate_every = cfg.validate_every > 0 ? cfg.validate_every : steps_per_epoch;
  tc.seed = cfg.seed;
  tc.crop_frames = cfg.crop_frames;

  FinetuneResult out;
  if (tc.total_iters > 0) out.stage = contrastive::train_contrastive_stage(model, train, val, tc);
  out.report = eval_retrieval(model, test, "finetune-test");
  out.report.task = "finetune-retrieval";
  out.report.seed = cfg.seed;
  return out;
}

}  // namespace audiolab::evalsuite
