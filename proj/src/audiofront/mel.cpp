// SPDX-License-Identifier: Apache-2.0

#include "audiolab/audiofront/mel.hpp"

#include <cmath>
#include <complex>
#include <fstream>

namespace audiolab::audiofront {

namespace {

constexpr double kPi = 3.14159265358979323846;

bool is_pow2(int v) { return v > 0 && (v & (v - 1)) == 0; }

// Iterative radix-2 FFT, in place.
void fft(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * kPi / static_cast<double>(len);
    const std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t j = 0; j < len / 2; ++j) {
        const std::complex<double> u = a[i + j];
        const std::complex<double> v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
        w *= wl;
      }
    }
  }
}

void validate(const MelConfig& cfg) {
  if (cfg.sample_rate <= 0) throw ConfigError("mel: sample_rate must be positive");
  if (!is_pow2(cfg.n_fft)) throw ConfigError("mel: n_fft must be a power of two");
  if (cfg.win <= 0 || cfg.win > cfg.n_fft)
    throw ConfigError("mel: need 0 < win <= n_fft, got win=" + std::to_string(cfg.win) +
                      " n_fft=" + std::to_string(cfg.n_fft));
  if (cfg.hop <= 0) throw ConfigError("mel: hop must be positive");
  if (cfg.mel_bins <= 0) throw ConfigError("mel: mel_bins must be positive");
  if (cfg.fmin < 0 || cfg.fmax <= cfg.fmin)
    throw ConfigError("mel: need 0 <= fmin < fmax");
  if (cfg.fmax > cfg.sample_rate / 2.0)
    throw ConfigError("mel: fmax " + std::to_string(cfg.fmax) + " exceeds Nyquist of " +
                      std::to_string(cfg.sample_rate) + " Hz input");
  if (cfg.floor_eps <= 0) throw ConfigError("mel: floor_eps must be positive");
}

}  // namespace

std::uint64_t MelConfig::fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ull;
  const double fields[] = {static_cast<double>(sample_rate), static_cast<double>(win),
                           static_cast<double>(hop),         static_cast<double>(n_fft),
                           static_cast<double>(mel_bins),    fmin,
                           fmax,                             floor_eps};
  h = fnv1a64(fields, sizeof fields, h);
  return h;
}

// Slaney scale: linear below 1 kHz, logarithmic above.
double hz_to_mel(double hz) {
  const double f_sp = 200.0 / 3.0;
  const double min_log_hz = 1000.0, min_log_mel = min_log_hz / f_sp;
  const double logstep = std::log(6.4) / 27.0;
  return hz < min_log_hz ? hz / f_sp : min_log_mel + std::log(hz / min_log_hz) / logstep;
}

double mel_to_hz(double mel) {
  const double f_sp = 200.0 / 3.0;
  const double min_log_hz = 1000.0, min_log_mel = min_log_hz / f_sp;
  const double logstep = std::log(6.4) / 27.0;
  return mel < min_log_mel ? mel * f_sp : min_log_hz * std::exp(logstep * (mel - min_log_mel));
}

std::vector<double> mel_filterbank(const MelConfig& cfg) {
  validate(cfg);
  const std::size_t bins = static_cast<std::size_t>(cfg.n_fft) / 2 + 1;
  const std::size_t f = static_cast<std::size_t>(cfg.mel_bins);
  std::vector<double> edges(f + 2);
  const double mlo = hz_to_mel(cfg.fmin), mhi = hz_to_mel(cfg.fmax);
  for (std::size_t i = 0; i < f + 2; ++i)
    edges[i] = mel_to_hz(mlo + (mhi - mlo) * static_cast<double>(i) / static_cast<double>(f + 1));

  std::vector<double> fb(f * bins, 0.0);
  const double hz_per_bin = static_cast<double>(cfg.sample_rate) / cfg.n_fft;
  for (std::size_t m = 0; m < f; ++m) {
    const double left = edges[m], center = edges[m + 1], right = edges[m + 2];
    for (std::size_t k = 0; k < bins; ++k) {
      const double freq = hz_per_bin * static_cast<double>(k);
      double w = 0.0;
      if (freq > left && freq < right)
        w = freq <= center ? (freq - left) / (center - left) : (right - freq) / (right - center);
      fb[m * bins + k] = std::max(0.0, w);
    }
  }
  return fb;
}

MelSpectrogram logmel(const AudioClip& clip, const MelConfig& cfg) {
  validate(cfg);
  if (clip.sample_rate != cfg.sample_rate)
    throw ConfigError("logmel: clip rate " + std::to_string(clip.sample_rate) +
                      " differs from config rate " + std::to_string(cfg.sample_rate));
  const std::size_t n = clip.samples.size();
  if (n < static_cast<std::size_t>(cfg.hop))
    throw DegenerateInputError("logmel: clip '" + clip.id + "' shorter than one hop (" +
                               std::to_string(n) + " samples)");

  const std::size_t n_fft = static_cast<std::size_t>(cfg.n_fft);
  const std::size_t bins = n_fft / 2 + 1;
  const std::size_t t_frames = 1 + n / static_cast<std::size_t>(cfg.hop);

  // Periodic Hann of length win, centered in the n_fft buffer.
  std::vector<double> window(n_fft, 0.0);
  const std::size_t woff = (n_fft - static_cast<std::size_t>(cfg.win)) / 2;
  for (int i = 0; i < cfg.win; ++i)
    window[woff + static_cast<std::size_t>(i)] =
        0.5 * (1.0 - std::cos(2.0 * kPi * i / static_cast<double>(cfg.win)));

  const std::vector<double> fb = mel_filterbank(cfg);

  MelSpectrogram mel;
  mel.num_frames = t_frames;
  mel.mel_bins = static_cast<std::size_t>(cfg.mel_bins);
  mel.frame_rate = static_cast<double>(cfg.sample_rate) / cfg.hop;
  mel.config_fingerprint = cfg.fingerprint();
  mel.frames.assign(t_frames * mel.mel_bins, 0.0);

  std::vector<std::complex<double>> buf(n_fft);
  std::vector<double> power(bins);
  for (std::size_t t = 0; t < t_frames; ++t) {
    const std::ptrdiff_t start = static_cast<std::ptrdiff_t>(t) * cfg.hop -
                                 static_cast<std::ptrdiff_t>(n_fft) / 2;
    for (std::size_t i = 0; i < n_fft; ++i) {
      const std::ptrdiff_t si = start + static_cast<std::ptrdiff_t>(i);
      const double s =
          (si < 0 || si >= static_cast<std::ptrdiff_t>(n)) ? 0.0 : clip.samples[static_cast<std::size_t>(si)];
      buf[i] = {s * window[i], 0.0};
    }
    fft(buf);
    for (std::size_t k = 0; k < bins; ++k) power[k] = std::norm(buf[k]);
    for (std::size_t m = 0; m < mel.mel_bins; ++m) {
      double e = 0.0;
      const double* row = fb.data() + m * bins;
      for (std::size_t k = 0; k < bins; ++k) e += row[k] * power[k];
      mel.frames[t * mel.mel_bins + m] = std::log(e + cfg.floor_eps);
    }
  }
  return mel;
}

void write_feature_cache(const std::string& path, const MelSpectrogram& mel) {
  std::ofstream of(path, std::ios::binary);
  if (!of) throw ParseError("feature cache: cannot open " + path + " for writing");
  of.write("ALFC", 4);
  const std::uint32_t version = 1;
  const std::uint32_t t = static_cast<std::uint32_t>(mel.num_frames);
  const std::uint32_t f = static_cast<std::uint32_t>(mel.mel_bins);
  of.write(reinterpret_cast<const char*>(&version), 4);
  of.write(reinterpret_cast<const char*>(&mel.config_fingerprint), 8);
  of.write(reinterpret_cast<const char*>(&t), 4);
  of.write(reinterpret_cast<const char*>(&f), 4);
  of.write(reinterpret_cast<const char*>(&mel.frame_rate), 8);
  std::vector<float> payload(mel.frames.begin(), mel.frames.end());
  of.write(reinterpret_cast<const char*>(payload.data()),
           static_cast<std::streamsize>(payload.size() * sizeof(float)));
}

MelSpectrogram read_feature_cache(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("feature cache: cannot open " + path);
  char magic[4];
  std::uint32_t version = 0, t = 0, f = 0;
  MelSpectrogram mel;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&version), 4);
  in.read(reinterpret_cast<char*>(&mel.config_fingerprint), 8);
  in.read(reinterpret_cast<char*>(&t), 4);
  in.read(reinterpret_cast<char*>(&f), 4);
  in.read(reinterpret_cast<char*>(&mel.frame_rate), 8);
  if (!in || std::string(magic, 4) != "ALFC" || version != 1)
    throw ParseError("feature cache: bad header in " + path);
  mel.num_frames = t;
  mel.mel_bins = f;
  std::vector<float> payload(static_cast<std::size_t>(t) * f);
  in.read(reinterpret_cast<char*>(payload.data()),
          static_cast<std::streamsize>(payload.size() * sizeof(float)));
  if (!in) throw ParseError("feature cache: truncated payload in " + path);
  mel.frames.assign(payload.begin(), payload.end());
  return mel;
}

}  // namespace audiolab::audiofront
