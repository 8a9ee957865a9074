// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <limits>
#include <string>
#include <vector>

#include "audiolab/audiofront/feature_store.hpp"
#include "audiolab/contrastive/contrastive.hpp"
#include "audiolab/encoders/biencoder.hpp"
#include "audiolab/toygen/toygen.hpp"

namespace audiolab::contrastive {

// Parallel audio-text pairs resolved to features and token ids.
struct PairDataset {
  std::vector<const audiofront::MelSpectrogram*> mels;
  std::vector<std::vector<std::size_t>> texts;

  std::size_t size() const { return mels.size(); }
};

PairDataset make_pair_dataset(const std::vector<const toygen::AudioTextExample*>& items,
                              audiofront::FeatureStore& features,
                              const textproc::Vocabulary& vocab);

struct TraceRow {
  std::size_t iter = 0;
  double loss = 0.0;
  double lr = 0.0;
  double val_metric = std::numeric_limits<double>::quiet_NaN();  // mean R@1
  double val_loss = std::numeric_limits<double>::quiet_NaN();
};

struct StageResult {
  std::vector<TraceRow> trace;
  double best_metric = -1.0;
  std::size_t best_iter = 0;
  double best_val_loss = std::numeric_limits<double>::quiet_NaN();
  double initial_loss = std::numeric_limits<double>::quiet_NaN();
};

// Validation retrieval score: mean of A->T and T->A R@1 over the set.
double retrieval_val_metric(encoders::BiEncoderModel& model, const PairDataset& val,
                            double* out_val_loss = nullptr);

// One InfoNCE stage with shuffled epochs, cosine LR, jointly trained
// temperature (clamped from below) and best-checkpoint restore.
StageResult train_contrastive_stage(encoders::BiEncoderModel& model, const PairDataset& train,
                                    const PairDataset& val, const TrainConfig& cfg);

struct TwoStageArtifacts {
  StageResult stage1, stage2;
  std::string stage1_ckpt, stage2_ckpt;
};

// Stage 1 on the synthetic pairs (validation pairs drawn from them), stage 2
// initialized from stage 1's best checkpoint and continued on the real data.
TwoStageArtifacts pretrain_two_stage(encoders::BiEncoderModel& model,
                                     const PairDataset& synthetic, const PairDataset& real_train,
                                     const PairDataset& real_val, const TrainConfig& stage1,
                                     const TrainConfig& stage2, const std::string& out_dir);

void save_trace_csv(const std::string& path, const std::vector<TraceRow>& trace);

}  // namespace audiolab::contrastive
