// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "audiolab/audiofront/mel.hpp"
#include "audiolab/captioner/captioner.hpp"
#include "audiolab/contrastive/contrastive.hpp"
#include "audiolab/encoders/biencoder.hpp"
#include "audiolab/evalsuite/evalsuite.hpp"
#include "audiolab/toygen/toygen.hpp"

namespace audiolab::cli {

// Built-in defaults. The "paper" profile records the reference recipe's
// hyperparameters as documentation; the "desk" profile is the minutes-scale
// configuration used by the tests.
nlohmann::json default_config(const std::string& profile);

// Parses the file (empty path = defaults only), merges it over the profile
// defaults, rejects unknown keys and mismatched types with their JSON path,
// and validates value ranges.
nlohmann::json load_config(const std::string& path, const std::string& profile = "desk");

// Merge/validation core, exposed for tests.
nlohmann::json merge_config(const nlohmann::json& defaults, const nlohmann::json& overrides,
                            const std::string& path = "");
void validate_config(const nlohmann::json& cfg);

// Typed views over the resolved tree.
audiofront::MelConfig mel_config_from(const nlohmann::json& cfg);
toygen::CorpusConfig corpus_config_from(const nlohmann::json& cfg);
encoders::BiEncoderConfig biencoder_config_from(const nlohmann::json& cfg,
                                                std::size_t vocab_size,
                                                std::uint64_t mel_fingerprint);
captioner::CaptionerConfig captioner_config_from(const nlohmann::json& cfg,
                                                 std::size_t vocab_size,
                                                 std::vector<std::string> tag_vocab,
                                                 std::uint64_t mel_fingerprint);
captioner::CaptionTrainConfig captioner_train_config_from(const nlohmann::json& cfg,
                                                          std::uint64_t seed);
contrastive::TrainConfig stage_config_from(const nlohmann::json& stage, std::uint64_t seed);
evalsuite::FinetuneRetrievalConfig finetune_config_from(const nlohmann::json& cfg,
                                                        std::uint64_t seed);
evalsuite::ClassifierConfig classifier_config_from(const nlohmann::json& cfg,
                                                   std::size_t classes, std::uint64_t seed);

}  // namespace audiolab::cli
