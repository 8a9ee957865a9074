// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "audiolab/audiofront/wav.hpp"
#include "audiolab/common.hpp"

namespace audiolab::audiofront {

// STFT/mel parameters. Defaults are the desk-scale configuration.
struct MelConfig {
  int sample_rate = 16000;
  int win = 512;
  int hop = 160;
  int n_fft = 512;
  int mel_bins = 64;
  double fmin = 50.0;
  double fmax = 8000.0;
  double floor_eps = 1e-10;

  std::uint64_t fingerprint() const;
};

// T x F matrix of natural-log mel energies.
struct MelSpectrogram {
  std::vector<double> frames;  // row-major [T, F]
  std::size_t num_frames = 0;
  std::size_t mel_bins = 0;
  double frame_rate = 0.0;
  std::uint64_t config_fingerprint = 0;

  double at(std::size_t t, std::size_t f) const { return frames[t * mel_bins + f]; }
};

// Slaney-style mel scale conversions.
double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Triangular filterbank, row-major [mel_bins, n_fft/2 + 1], peak height 1.
std::vector<double> mel_filterbank(const MelConfig& cfg);

// Hann-windowed power STFT -> mel filterbank -> log(energy + floor_eps),
// frames centered with zero padding so T = 1 + floor(num_samples / hop).
MelSpectrogram logmel(const AudioClip& clip, const MelConfig& cfg);

// Binary feature cache: header (dims + fingerprint) + row-major f32 payload.
void write_feature_cache(const std::string& path, const MelSpectrogram& mel);
MelSpectrogram read_feature_cache(const std::string& path);

}  // namespace audiolab::audiofront
