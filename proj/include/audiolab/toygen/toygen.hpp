// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "audiolab/audiofront/wav.hpp"
#include "audiolab/common.hpp"

namespace audiolab::toygen {

enum class SynthKind { kSine, kSquare, kChirp, kNoiseBurst, kAmTone };

// One synthesizable audio event type. event_id doubles as the textual class
// label (underscores become blanks for zero-shot prompts), and the phrase
// variants are the caption grammar's surface forms for this event.
struct EventSpec {
  std::string event_id;
  SynthKind kind = SynthKind::kSine;
  double freq_min = 0.0, freq_max = 0.0;  // base/carrier frequency (chirp: start)
  double freq_end_min = 0.0, freq_end_max = 0.0;  // chirp end frequency
  double mod_min = 0.0, mod_max = 0.0;            // AM modulation rate
  double dur_min = 0.8, dur_max = 1.4;
  double amp_min = 0.3, amp_max = 0.7;
  std::vector<std::string> phrases;  // >= 3 surface variants
};

class EventRegistry {
public:
  EventRegistry() = default;
  explicit EventRegistry(std::vector<EventSpec> events);

  const std::vector<EventSpec>& events() const { return events_; }
  const EventSpec& by_id(const std::string& id) const;
  bool has(const std::string& id) const;
  std::size_t size() const { return events_.size(); }

private:
  std::vector<EventSpec> events_;
};

// Ten spectrally distinct event types over the five synthesis kinds.
EventRegistry default_registry();

// Deterministic rendering of one event instance for (spec, seed).
audiofront::AudioClip synth_event(const EventSpec& spec, int sample_rate, std::uint64_t seed);

// One parallel corpus item. Audio lives in a WAV file on disk.
struct AudioTextExample {
  std::string clip_id;
  std::string wav_path;
  std::string caption;             // empty for tag-only items
  std::vector<std::string> tags;   // sorted unique event ids, non-empty
  std::string split;               // train | val | test
  std::string provenance = "human-style";  // human-style | synthetic
};

struct Corpus {
  std::vector<AudioTextExample> items;

  std::vector<const AudioTextExample*> split(const std::string& which) const;
  std::vector<std::string> tag_set() const;  // sorted unique tags
};

struct SceneResult {
  audiofront::AudioClip clip;
  std::string caption;
  std::vector<std::string> tags;            // sorted unique
  std::vector<std::string> temporal_order;  // event ids by onset
};

// Mixes 1-3 events at random offsets, peak-normalizes to <= 0.9 and drafts a
// caption that mentions every event in temporal order.
SceneResult mix_scene(const std::vector<EventSpec>& events, int sample_rate, double clip_dur_min,
                      double clip_dur_max, std::uint64_t seed);

struct CorpusConfig {
  std::size_t n_train = 500;
  std::size_t n_val = 100;
  std::size_t n_test = 100;
  std::size_t n_tag_only = 2000;
  std::vector<std::string> tag_holdout;  // event ids kept out of the caption corpus
  int sample_rate = 16000;
  double clip_dur_min = 2.0, clip_dur_max = 4.0;
  double p_one = 0.2, p_two = 0.4, p_three = 0.4;  // events per scene (caption corpus)
  // tag-only corpus may follow its own mix (emulating the source-distribution
  // gap between the event corpus and its captioned subset); negative values
  // fall back to the caption mix
  double tagonly_p_one = -1.0, tagonly_p_two = -1.0, tagonly_p_three = -1.0;
  bool unique_eval_captions = true;                // dedup captions in val/test
};

struct GeneratedCorpora {
  Corpus caption;   // captioned, holdout tags excluded (AudioCaps analog)
  Corpus tag_only;  // full registry, tags without captions (AudioSet analog)
};

// Emits both corpora deterministically for a fixed seed; WAV files are
// written under wav_dir.
GeneratedCorpora generate_corpus(const EventRegistry& registry, const CorpusConfig& cfg,
                                 std::uint64_t seed, const std::string& wav_dir);

// Single-event clips for classification-style evaluation, per_class clips
// for each id in class_ids, round-robin order.
Corpus generate_single_event_set(const EventRegistry& registry,
                                 const std::vector<std::string>& class_ids,
                                 std::size_t per_class, int sample_rate, std::uint64_t seed,
                                 const std::string& wav_dir, const std::string& id_prefix);

// Grammar-recovery oracle: event ids whose phrase variants occur as a
// contiguous word run in the caption.
std::vector<std::string> recover_tags(const std::string& caption, const EventRegistry& registry);

// JSON-lines manifest IO: {clip_id, wav_path, caption, tags, split, provenance}.
void write_manifest(const std::string& path, const Corpus& corpus);
Corpus read_manifest(const std::string& path);

}  // namespace audiolab::toygen
