// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "audiolab/diffcore/gradsuite.hpp"
#include "audiolab/diffcore/ops.hpp"
#include "audiolab/diffcore/params.hpp"

namespace audiolab::contrastive {

// Row-wise L2 normalization; a zero-norm row is a numeric error naming it.
diff::Tensor l2_normalize_rows(const diff::Tensor& x);

// S[i, j] = cosine(audio_i, text_j), graph-recorded. Counts must match.
diff::Tensor similarity_matrix(const diff::Tensor& audio, const diff::Tensor& text);

// Plain-value cosine scores for evaluation, rows x cols may differ.
std::vector<double> cosine_scores(const std::vector<std::vector<double>>& rows,
                                  const std::vector<std::vector<double>>& cols);

// Symmetric InfoNCE over a square similarity matrix with logits S / tau.
// Total = (1/N) sum_i (L_i^{A->T} + L_i^{T->A})  -- both directions averaged
// by 1/N, not 1/2N.
struct InfonceParts {
  diff::Tensor loss;  // scalar
  diff::Tensor a2t;   // [N] per-row terms
  diff::Tensor t2a;   // [N] per-column terms
};
InfonceParts infonce_loss(const diff::Tensor& similarity, double tau);
// Learnable-temperature variant: tau = exp(log_temperature).
InfonceParts infonce_loss_logtemp(const diff::Tensor& similarity,
                                  const diff::Tensor& log_temperature);

// Linear warmup to max_lr over warmup_iters, then half-cosine decay to 0.
struct TrainConfig {
  std::size_t batch_size = 128;
  std::size_t total_iters = 200000;
  std::size_t warmup_iters = 10000;
  double max_lr = 1e-4;
  std::size_t validate_every = 500;
  std::size_t val_pairs = 1200;
  std::uint64_t seed = 0;
  std::size_t crop_frames = 101;          // rectangular audio excerpt length
  std::string select_by = "retrieval";    // retrieval | loss (checkpoint selection)

  void validate() const;
};
double lr_schedule(std::size_t iter, const TrainConfig& cfg);

// ---- checkpoint persistence ----
// Layout: magic + JSON manifest (names, shapes, dtype, config, stage) +
// contiguous little-endian f64 payload in manifest order.
struct CheckpointMeta {
  std::string stage;
  std::uint64_t config_fingerprint = 0;
  nlohmann::json config;  // architecture config, enough to rebuild the model
};

void save_checkpoint(const std::string& path, const diff::ParamStore& params,
                     const CheckpointMeta& meta);
CheckpointMeta read_checkpoint_meta(const std::string& path);
// Loads values into a store with the exact same parameter set; mismatches
// raise CheckpointError listing every offending name. No partial loads.
CheckpointMeta load_checkpoint(const std::string& path, diff::ParamStore& params);

std::uint64_t file_hash(const std::string& path);

// Finite-difference checks of the contrastive loss (w.r.t. similarity matrix
// and w.r.t. raw embeddings), three random shapes each.
std::vector<diff::NamedGradCheck> infonce_gradient_checks(std::uint64_t seed);

}  // namespace audiolab::contrastive
