// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "audiolab/audiofront/mel.hpp"
#include "audiolab/audiofront/wav.hpp"

using namespace audiolab;
using namespace audiolab::audiofront;

namespace {

std::string tmp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

AudioClip sine_clip(double freq, double secs, int rate, double amp = 0.5) {
  AudioClip c;
  c.sample_rate = rate;
  c.id = "sine";
  const std::size_t n = static_cast<std::size_t>(secs * rate);
  c.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    c.samples[i] = amp * std::sin(2.0 * 3.141592653589793 * freq * static_cast<double>(i) / rate);
  return c;
}

}  // namespace

TEST_CASE("wav round trip: zeros, exact scale, quantization bound") {
  const std::string path = tmp_path("audiofront_zero.wav");

  AudioClip zeros;
  zeros.sample_rate = 16000;
  zeros.samples.assign(16000, 0.0);
  save_wav(path, zeros);
  AudioClip rz = load_wav(path);
  CHECK(rz.sample_rate == 16000);
  CHECK(rz.samples.size() == 16000);
  for (double v : rz.samples) CHECK(v == 0.0);

  // -32768 decodes to exactly -1.0
  AudioClip neg;
  neg.sample_rate = 8000;
  neg.samples = {-1.0};
  save_wav(path, neg);
  CHECK(load_wav(path).samples[0] == -1.0);

  // synthesized tone round trips within one quantization step
  AudioClip tone = sine_clip(440.0, 0.25, 16000, 0.9);
  save_wav(path, tone);
  AudioClip rt = load_wav(path);
  REQUIRE(rt.samples.size() == tone.samples.size());
  double max_diff = 0.0;
  for (std::size_t i = 0; i < tone.samples.size(); ++i)
    max_diff = std::max(max_diff, std::fabs(tone.samples[i] - rt.samples[i]));
  CHECK(max_diff <= 1.0 / 32768.0);
  std::remove(path.c_str());
}

TEST_CASE("wav loader rejects non-mono and truncated files") {
  const std::string path = tmp_path("audiofront_bad.wav");
  // stereo header
  {
    AudioClip c;
    c.sample_rate = 16000;
    c.samples = {0.0, 0.0};
    save_wav(path, c);
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(22);
    char two[2] = {2, 0};
    f.write(two, 2);
  }
  CHECK_THROWS_AS(load_wav(path), FormatError);
  // truncated data chunk
  {
    AudioClip c;
    c.sample_rate = 16000;
    c.samples.assign(64, 0.25);
    save_wav(path, c);
    std::filesystem::resize_file(path, 60);
  }
  CHECK_THROWS_AS(load_wav(path), ParseError);
  std::remove(path.c_str());
}

TEST_CASE("logmel of silence is log(floor_eps) everywhere") {
  AudioClip c;
  c.sample_rate = 16000;
  c.samples.assign(16000, 0.0);
  MelConfig cfg;
  MelSpectrogram mel = logmel(c, cfg);
  const double floor_val = std::log(cfg.floor_eps);
  for (double v : mel.frames) CHECK(v == doctest::Approx(floor_val).epsilon(1e-12));
}

TEST_CASE("frame count is 1 + floor(samples/hop) under center padding") {
  AudioClip c;
  c.sample_rate = 16000;
  c.samples.assign(16000, 0.0);
  MelConfig cfg;
  cfg.hop = 320;
  CHECK(logmel(c, cfg).num_frames == 51);
  cfg.hop = 160;
  CHECK(logmel(c, cfg).num_frames == 101);
}

TEST_CASE("1 kHz sine peaks in the mel filters containing 1 kHz") {
  MelConfig cfg;
  cfg.hop = 320;
  AudioClip c = sine_clip(1000.0, 1.0, 16000);
  MelSpectrogram mel = logmel(c, cfg);

  // which filters have weight at the FFT bin of 1 kHz (bin 32 at 31.25 Hz/bin)
  const std::vector<double> fb = mel_filterbank(cfg);
  const std::size_t bins = static_cast<std::size_t>(cfg.n_fft) / 2 + 1;
  const std::size_t k1000 = 32;
  std::vector<std::size_t> covering;
  for (std::size_t m = 0; m < mel.mel_bins; ++m)
    if (fb[m * bins + k1000] > 0.0) covering.push_back(m);
  REQUIRE(!covering.empty());

  for (std::size_t t = 0; t < mel.num_frames; ++t) {
    std::size_t arg = 0;
    for (std::size_t m = 1; m < mel.mel_bins; ++m)
      if (mel.at(t, m) > mel.at(t, arg)) arg = m;
    const bool in_set =
        std::find(covering.begin(), covering.end(), arg) != covering.end();
    CHECK(in_set);
  }
}

TEST_CASE("doubling amplitude raises log-mel by exactly log 4 where energetic") {
  MelConfig cfg;
  cfg.hop = 320;
  AudioClip c1 = sine_clip(700.0, 0.5, 16000, 0.25);
  AudioClip c2 = c1;
  for (auto& s : c2.samples) s *= 2.0;
  MelSpectrogram m1 = logmel(c1, cfg), m2 = logmel(c2, cfg);
  const double log4 = std::log(4.0);
  const double floor_val = std::log(cfg.floor_eps);
  for (std::size_t i = 0; i < m1.frames.size(); ++i) {
    CHECK(m2.frames[i] >= m1.frames[i] - 1e-12);
    if (m1.frames[i] > floor_val + 25.0)  // energy >> floor_eps
      CHECK(m2.frames[i] - m1.frames[i] == doctest::Approx(log4).epsilon(1e-9));
  }
}

TEST_CASE("time shift by one hop shifts frames by one index") {
  MelConfig cfg;
  cfg.hop = 320;
  AudioClip a = sine_clip(620.0, 0.5, 16000);
  AudioClip b;
  b.sample_rate = a.sample_rate;
  b.id = "shifted";
  b.samples.assign(static_cast<std::size_t>(cfg.hop), 0.0);
  b.samples.insert(b.samples.end(), a.samples.begin(), a.samples.end());
  MelSpectrogram ma = logmel(a, cfg), mb = logmel(b, cfg);
  // interior frames: skip edges touched by padding
  for (std::size_t t = 2; t + 3 < ma.num_frames; ++t)
    for (std::size_t m = 0; m < ma.mel_bins; ++m)
      CHECK(std::fabs(ma.at(t, m) - mb.at(t + 1, m)) < 1e-9);
}

TEST_CASE("filterbank rows are non-negative and cover [fmin, fmax]") {
  MelConfig cfg;
  const std::vector<double> fb = mel_filterbank(cfg);
  const std::size_t bins = static_cast<std::size_t>(cfg.n_fft) / 2 + 1;
  for (double v : fb) CHECK(v >= 0.0);
  const double hz_per_bin = static_cast<double>(cfg.sample_rate) / cfg.n_fft;
  for (std::size_t k = 0; k < bins; ++k) {
    const double f = hz_per_bin * static_cast<double>(k);
    if (f <= cfg.fmin || f >= cfg.fmax) continue;
    double col = 0.0;
    for (int m = 0; m < cfg.mel_bins; ++m) col += fb[static_cast<std::size_t>(m) * bins + k];
    CHECK(col > 0.0);
  }
}

TEST_CASE("degenerate and invalid configurations are rejected") {
  AudioClip c;
  c.sample_rate = 16000;
  c.samples.assign(100, 0.1);
  MelConfig cfg;
  CHECK_THROWS_AS(logmel(c, cfg), DegenerateInputError);  // shorter than one hop
  MelConfig bad = cfg;
  bad.fmax = 9000.0;  // above Nyquist
  CHECK_THROWS_AS(mel_filterbank(bad), ConfigError);
  bad = cfg;
  bad.win = 1024;  // win > n_fft
  CHECK_THROWS_AS(mel_filterbank(bad), ConfigError);
}

TEST_CASE("feature cache round trip preserves dims and fingerprint") {
  MelConfig cfg;
  cfg.hop = 320;
  AudioClip c = sine_clip(500.0, 0.3, 16000);
  MelSpectrogram mel = logmel(c, cfg);
  const std::string path = tmp_path("audiofront_cache.bin");
  write_feature_cache(path, mel);
  MelSpectrogram rt = read_feature_cache(path);
  CHECK(rt.num_frames == mel.num_frames);
  CHECK(rt.mel_bins == mel.mel_bins);
  CHECK(rt.config_fingerprint == mel.config_fingerprint);
  // payload is f32, so round trip is near-exact only
  for (std::size_t i = 0; i < mel.frames.size(); ++i)
    CHECK(std::fabs(rt.frames[i] - mel.frames[i]) < 1e-4 * std::max(1.0, std::fabs(mel.frames[i])));

  std::filesystem::resize_file(path, 16);
  CHECK_THROWS_AS(read_feature_cache(path), ParseError);
  std::remove(path.c_str());
}
