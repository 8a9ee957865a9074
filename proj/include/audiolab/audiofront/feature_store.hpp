// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <unordered_map>

#include "audiolab/audiofront/mel.hpp"

namespace audiolab::audiofront {

// In-memory per-clip log-mel cache keyed by clip id. One store per mel
// configuration; trainers share it across stages.
class FeatureStore {
public:
  explicit FeatureStore(MelConfig cfg) : cfg_(cfg) {}

  const MelConfig& config() const { return cfg_; }

  const MelSpectrogram& from_wav(const std::string& clip_id, const std::string& wav_path) {
    auto it = cache_.find(clip_id);
    if (it != cache_.end()) return it->second;
    AudioClip clip = load_wav(wav_path);
    clip.id = clip_id;
    return cache_.emplace(clip_id, logmel(clip, cfg_)).first->second;
  }

  const MelSpectrogram& from_clip(const AudioClip& clip) {
    auto it = cache_.find(clip.id);
    if (it != cache_.end()) return it->second;
    return cache_.emplace(clip.id, logmel(clip, cfg_)).first->second;
  }

  void clear() { cache_.clear(); }

private:
  MelConfig cfg_;
  std::unordered_map<std::string, MelSpectrogram> cache_;
};

}  // namespace audiolab::audiofront
