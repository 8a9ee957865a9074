// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "audiolab/contrastive/trainer.hpp"
#include "audiolab/encoders/biencoder.hpp"
#include "audiolab/evalsuite/metrics.hpp"

namespace audiolab::evalsuite {

// Named scalar results with run metadata, serialized for comparison.
struct MetricReport {
  std::string task;
  std::string dataset_id;
  std::string checkpoint_id;
  std::uint64_t seed = 0;
  std::map<std::string, double> metrics;
  double wall_clock_sec = 0.0;

  nlohmann::json to_json() const;
  static MetricReport from_json(const nlohmann::json& j);
  // hash over everything except wall clock (for determinism contracts)
  std::uint64_t stable_digest() const;
  void save(const std::string& path) const;
  static MetricReport load(const std::string& path);
};

// ---- zero-shot classification ----
struct ZeroShotResult {
  std::vector<double> scores;  // [clips, labels] cosine similarities
  std::vector<std::size_t> predictions;
  std::size_t n_clips = 0, n_labels = 0;
};

// Labels pass through label_to_text and are encoded once; scores feed both
// single-label argmax and multi-label mAP.
ZeroShotResult zero_shot_classify(encoders::BiEncoderModel& model,
                                  const std::vector<const audiofront::MelSpectrogram*>& clips,
                                  const std::vector<std::string>& labels,
                                  const textproc::Vocabulary& vocab);

// Score/argmax core over precomputed embeddings (also the stub-encoder path).
ZeroShotResult zero_shot_from_embeddings(const std::vector<std::vector<double>>& clip_rows,
                                         const std::vector<std::vector<double>>& label_rows);

double accuracy(const std::vector<std::size_t>& predictions,
                const std::vector<std::size_t>& truths);

// ---- classifier heads on Enc_A ----
struct ClassifierConfig {
  enum class Mode { kLinearProbe, kFineTune };
  enum class Task { kSingleLabel, kMultiLabel };
  Mode mode = Mode::kLinearProbe;
  Task task = Task::kSingleLabel;
  std::size_t classes = 0;
  std::size_t steps = 300;
  std::size_t batch_size = 16;  // fine-tune mode only; probe is full batch
  double lr = 1e-2;
  std::size_t crop_frames = 101;
  std::uint64_t seed = 0;
};

struct TrainedClassifier {
  diff::LinearParams fc;
  std::vector<double> loss_trace;
};

// Single-label training uses softmax cross entropy over integer labels
// (one per clip); multi-label uses per-class sigmoid BCE over multi-hot
// rows. Linear probing freezes the encoder (verified bitwise by callers via
// ParamStore::bytes_hash).
TrainedClassifier train_classifier(encoders::BiEncoderModel& encoder,
                                   const std::vector<const audiofront::MelSpectrogram*>& clips,
                                   const std::vector<std::vector<int>>& label_rows,
                                   const ClassifierConfig& cfg);

// Per-class sigmoid BCE with logits, averaged over every entry.
diff::Tensor multi_label_bce(const diff::Tensor& logits, const diff::Tensor& targets);

// Head logits for a clip set, [clips, classes].
std::vector<double> classifier_scores(encoders::BiEncoderModel& encoder,
                                      const TrainedClassifier& head,
                                      const std::vector<const audiofront::MelSpectrogram*>& clips);

// ---- retrieval ----
// R@{1,5,10} in both directions over parallel pairs.
MetricReport eval_retrieval(encoders::BiEncoderModel& model,
                            const contrastive::PairDataset& pairs, const std::string& dataset_id);

struct FinetuneRetrievalConfig {
  std::size_t epochs = 20;
  std::size_t batch_size = 128;
  double max_lr = 5e-5;
  std::size_t validate_every = 0;  // 0 = once per epoch
  std::size_t crop_frames = 101;
  std::uint64_t seed = 0;
};

struct FinetuneResult {
  contrastive::StageResult stage;
  MetricReport report;  // test-set retrieval of the fine-tuned model
};

// InfoNCE fine-tuning with linear warmup over the first epoch, then cosine
// decay; checkpoint selection by validation retrieval score.
FinetuneResult finetune_retrieval(encoders::BiEncoderModel& model,
                                  const contrastive::PairDataset& train,
                                  const contrastive::PairDataset& val,
                                  const contrastive::PairDataset& test,
                                  const FinetuneRetrievalConfig& cfg);

}  // namespace audiolab::evalsuite
