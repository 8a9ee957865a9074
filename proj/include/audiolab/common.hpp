// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace audiolab {

// Error hierarchy. Everything user-facing derives from Error so the CLI can
// catch one type and map it to a nonzero exit with a diagnostic.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error { public: using Error::Error; };       // dimension mismatch
class ConfigError : public Error { public: using Error::Error; };      // bad configuration value
class NumericError : public Error { public: using Error::Error; };     // NaN/Inf/degenerate numerics
class DataError : public Error { public: using Error::Error; };        // bad dataset contents
class FormatError : public Error { public: using Error::Error; };      // unsupported file format
class ParseError : public Error { public: using Error::Error; };       // truncated/corrupt file
class CheckpointError : public Error { public: using Error::Error; };  // manifest/model mismatch
class StateError : public Error { public: using Error::Error; };       // optimizer/model state misuse
class EvalError : public Error { public: using Error::Error; };        // degenerate evaluation input
class LookupError : public Error { public: using Error::Error; };      // unknown key/tag/token
class DegenerateInputError : public Error { public: using Error::Error; };

// FNV-1a 64-bit. Used for config fingerprints and determinism checks.
inline std::uint64_t fnv1a64(const void* data, std::size_t n,
                             std::uint64_t h = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t fnv1a64(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ull) {
  return fnv1a64(s.data(), s.size(), h);
}

std::string hex64(std::uint64_t v);

// Deterministic random source. All distributions are implemented on top of
// the raw mt19937_64 stream so that sampled values depend only on the seed,
// not on the standard library's distribution internals.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // [0, 1)
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // inclusive bounds, unbiased via rejection
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    std::uint64_t v;
    do { v = next_u64(); } while (v >= limit);
    return lo + static_cast<std::int64_t>(v % span);
  }

  // Box-Muller; consumes two uniforms per sample.
  double normal() {
    double u1 = uniform(), u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(i) - 1));
      std::swap(v[i - 1], v[j]);
    }
  }

  // Independent child stream (for per-clip / per-stage generators).
  Rng fork(std::uint64_t stream) {
    std::uint64_t s = next_u64();
    s = fnv1a64(&stream, sizeof stream, s ^ 0x9e3779b97f4a7c15ull);
    return Rng(s);
  }

private:
  std::mt19937_64 gen_;
};

}  // namespace audiolab
