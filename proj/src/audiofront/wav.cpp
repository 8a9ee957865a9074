// SPDX-License-Identifier: Apache-2.0

#include "audiolab/audiofront/wav.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace audiolab::audiofront {

namespace {

std::uint32_t rd_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
std::uint16_t rd_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
void wr_u32(std::string& s, std::uint32_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>((v >> 8) & 0xff));
  s.push_back(static_cast<char>((v >> 16) & 0xff));
  s.push_back(static_cast<char>((v >> 24) & 0xff));
}
void wr_u16(std::string& s, std::uint16_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>((v >> 8) & 0xff));
}

}  // namespace

AudioClip load_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("load_wav: cannot open " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw ParseError("load_wav: " + path + " is not a RIFF/WAVE file");

  bool have_fmt = false;
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t sample_rate = 0;
  const unsigned char* data_ptr = nullptr;
  std::uint32_t data_len = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const char* tag = reinterpret_cast<const char*>(bytes.data() + pos);
    const std::uint32_t len = rd_u32(bytes.data() + pos + 4);
    if (pos + 8 + len > bytes.size())
      throw ParseError("load_wav: truncated chunk '" + std::string(tag, 4) + "' in " + path);
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      if (len < 16) throw ParseError("load_wav: fmt chunk too short in " + path);
      const unsigned char* f = bytes.data() + pos + 8;
      format = rd_u16(f);
      channels = rd_u16(f + 2);
      sample_rate = rd_u32(f + 4);
      bits = rd_u16(f + 14);
      have_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      data_ptr = bytes.data() + pos + 8;
      data_len = len;
    }
    pos += 8 + len + (len & 1);  // chunks are word aligned
  }
  if (!have_fmt || data_ptr == nullptr)
    throw ParseError("load_wav: missing fmt/data chunk in " + path);
  if (format != 1) throw FormatError("load_wav: " + path + " is not PCM (format tag " +
                                     std::to_string(format) + ")");
  if (channels != 1)
    throw FormatError("load_wav: " + path + " has " + std::to_string(channels) +
                      " channels, expected mono");
  if (bits != 16)
    throw FormatError("load_wav: " + path + " has " + std::to_string(bits) +
                      "-bit samples, expected 16");
  if (data_len % 2 != 0) throw ParseError("load_wav: odd data length in " + path);

  AudioClip clip;
  clip.sample_rate = static_cast<int>(sample_rate);
  clip.samples.resize(data_len / 2);
  for (std::size_t i = 0; i < clip.samples.size(); ++i) {
    const std::int16_t s =
        static_cast<std::int16_t>(rd_u16(data_ptr + 2 * i));
    clip.samples[i] = static_cast<double>(s) / 32768.0;
  }
  return clip;
}

void save_wav(const std::string& path, const AudioClip& clip) {
  if (clip.sample_rate <= 0) throw ConfigError("save_wav: sample rate must be positive");
  std::string out;
  const std::uint32_t data_len = static_cast<std::uint32_t>(clip.samples.size() * 2);
  out.reserve(44 + data_len);
  out.append("RIFF");
  wr_u32(out, 36 + data_len);
  out.append("WAVE");
  out.append("fmt ");
  wr_u32(out, 16);
  wr_u16(out, 1);  // PCM
  wr_u16(out, 1);  // mono
  wr_u32(out, static_cast<std::uint32_t>(clip.sample_rate));
  wr_u32(out, static_cast<std::uint32_t>(clip.sample_rate) * 2);
  wr_u16(out, 2);
  wr_u16(out, 16);
  out.append("data");
  wr_u32(out, data_len);
  for (double x : clip.samples) {
    double v = std::lround(std::min(1.0, std::max(-1.0, x)) * 32768.0);
    v = std::min(32767.0, std::max(-32768.0, v));
    wr_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(v)));
  }
  std::ofstream of(path, std::ios::binary);
  if (!of) throw ParseError("save_wav: cannot open " + path + " for writing");
  of.write(out.data(), static_cast<std::streamsize>(out.size()));
}

}  // namespace audiolab::audiofront
