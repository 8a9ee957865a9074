// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "audiolab/audiofront/feature_store.hpp"
#include "audiolab/captioner/captioner.hpp"
#include "audiolab/textproc/text.hpp"
#include "audiolab/toygen/toygen.hpp"

namespace audiolab::bootstrap {

// Strict reading: a clip survives only if every one of its tags is known to
// the caption corpus. The permissive alternative keeps clips with at least
// one known tag.
enum class FilterMode { kDropIfAnyUnknown, kDropIfAllUnknown };

struct FilterReport {
  std::size_t kept = 0;
  std::size_t dropped = 0;
};

toygen::Corpus filter_by_tag_vocab(const toygen::Corpus& tag_only,
                                   const std::vector<std::string>& caption_tag_set,
                                   FilterMode mode = FilterMode::kDropIfAnyUnknown,
                                   FilterReport* report = nullptr);

struct SyntheticReport {
  std::size_t clips = 0;
  std::size_t forced = 0;  // decodes that hit max_len without <EOS>
};

// One beam-searched caption per filtered clip, guided by the clip's tags.
// Output is sorted by clip_id and marked provenance = "synthetic".
toygen::Corpus generate_synthetic_corpus(captioner::CaptionModel& model,
                                         audiofront::FeatureStore& features,
                                         const textproc::Vocabulary& vocab,
                                         const toygen::Corpus& filtered,
                                         std::size_t beam_size = 3,
                                         SyntheticReport* report = nullptr);

}  // namespace audiolab::bootstrap
