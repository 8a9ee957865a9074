// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "audiolab/common.hpp"

namespace audiolab::audiofront {

// Mono waveform in [-1, 1].
struct AudioClip {
  std::vector<double> samples;
  int sample_rate = 0;
  std::string id;
};

// Reads a PCM 16-bit mono WAV. Samples are scaled by 1/32768, so the most
// negative code maps to exactly -1.0.
AudioClip load_wav(const std::string& path);

// Writes PCM 16-bit mono. Samples are clamped to [-1, 1] and rounded, so a
// write/read round trip differs by at most 1/32768 per sample.
void save_wav(const std::string& path, const AudioClip& clip);

}  // namespace audiolab::audiofront
