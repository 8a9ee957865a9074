// SPDX-License-Identifier: Apache-2.0

#include "audiolab/toygen/toygen.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "audiolab/textproc/text.hpp"

namespace audiolab::toygen {

namespace {
constexpr double kTwoPi = 6.28318530717958647692528676656;
}

EventRegistry::EventRegistry(std::vector<EventSpec> events) : events_(std::move(events)) {
  std::set<std::string> seen;
  for (const auto& e : events_) {
    if (!seen.insert(e.event_id).second)
      throw ConfigError("EventRegistry: duplicate event id " + e.event_id);
    if (e.phrases.size() < 3)
      throw ConfigError("EventRegistry: event " + e.event_id + " needs >= 3 phrase variants");
    if (e.dur_min <= 0 || e.dur_max < e.dur_min || e.amp_max < e.amp_min)
      throw ConfigError("EventRegistry: empty parameter range for " + e.event_id);
  }
}

const EventSpec& EventRegistry::by_id(const std::string& id) const {
  for (const auto& e : events_)
    if (e.event_id == id) return e;
  throw LookupError("EventRegistry: unknown event id " + id);
}

bool EventRegistry::has(const std::string& id) const {
  for (const auto& e : events_)
    if (e.event_id == id) return true;
  return false;
}

EventRegistry default_registry() {
  std::vector<EventSpec> ev;
  auto make = [&](std::string id, SynthKind kind, double f0, double f1,
                  std::vector<std::string> phrases) {
    EventSpec s;
    s.event_id = std::move(id);
    s.kind = kind;
    s.freq_min = f0;
    s.freq_max = f1;
    s.phrases = std::move(phrases);
    ev.push_back(std::move(s));
  };
  make("low_tone", SynthKind::kSine, 110, 240, {"a low tone", "a deep tone", "a low hum"});
  make("steady_tone", SynthKind::kSine, 400, 700,
       {"a steady tone", "a plain tone", "a medium tone"});
  make("high_tone", SynthKind::kSine, 900, 1500,
       {"a high tone", "a shrill tone", "a piercing tone"});
  make("low_buzz", SynthKind::kSquare, 130, 280, {"a low buzz", "a deep buzz", "a coarse buzz"});
  make("sharp_buzz", SynthKind::kSquare, 600, 1000,
       {"a sharp buzz", "a harsh buzz", "a bright buzz"});
  make("rising_sweep", SynthKind::kChirp, 300, 500,
       {"a rising sweep", "an upward sweep", "a climbing sweep"});
  ev.back().freq_end_min = 1800;
  ev.back().freq_end_max = 2600;
  make("falling_sweep", SynthKind::kChirp, 1800, 2600,
       {"a falling sweep", "a downward sweep", "a descending sweep"});
  ev.back().freq_end_min = 300;
  ev.back().freq_end_max = 500;
  make("noise_burst", SynthKind::kNoiseBurst, 0, 0,
       {"a burst of noise", "a noisy hiss", "a rush of static"});
  make("slow_warble", SynthKind::kAmTone, 400, 900,
       {"a slow warble", "a gentle warble", "a slow pulsing tone"});
  ev.back().mod_min = 2.0;
  ev.back().mod_max = 5.0;
  make("fast_warble", SynthKind::kAmTone, 400, 900,
       {"a fast warble", "a rapid warble", "a quick trembling tone"});
  ev.back().mod_min = 12.0;
  ev.back().mod_max = 20.0;
  return EventRegistry(std::move(ev));
}

audiofront::AudioClip synth_event(const EventSpec& spec, int sample_rate, std::uint64_t seed) {
  Rng rng(seed);
  const double dur = rng.uniform(spec.dur_min, spec.dur_max);
  const double amp = rng.uniform(spec.amp_min, spec.amp_max);
  const double f0 = rng.uniform(spec.freq_min, spec.freq_max);
  const double f1 = rng.uniform(spec.freq_end_min, spec.freq_end_max);
  const double fm = rng.uniform(spec.mod_min, spec.mod_max);
  const double phase0 = rng.uniform(0.0, kTwoPi);

  audiofront::AudioClip clip;
  clip.sample_rate = sample_rate;
  clip.id = spec.event_id;
  const std::size_t n = static_cast<std::size_t>(dur * sample_rate);
  clip.samples.resize(n);
  const double dt = 1.0 / sample_rate;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) * dt;
    double x = 0.0;
    switch (spec.kind) {
      case SynthKind::kSine:
        x = std::sin(kTwoPi * f0 * t + phase0);
        break;
      case SynthKind::kSquare:
        x = std::sin(kTwoPi * f0 * t + phase0) >= 0.0 ? 1.0 : -1.0;
        break;
      case SynthKind::kChirp:
        x = std::sin(kTwoPi * (f0 * t + 0.5 * (f1 - f0) * t * t / dur) + phase0);
        break;
      case SynthKind::kNoiseBurst:
        x = 2.0 * rng.uniform() - 1.0;
        break;
      case SynthKind::kAmTone:
        x = (0.5 + 0.5 * std::sin(kTwoPi * fm * t)) * std::sin(kTwoPi * f0 * t + phase0);
        break;
    }
    // 5 ms fade at both ends against clicks
    const double fade = 0.005;
    double env = 1.0;
    if (t < fade) env = t / fade;
    const double tail = dur - t;
    if (tail < fade) env = std::min(env, tail / fade);
    clip.samples[i] = amp * env * x;
  }
  return clip;
}

namespace {

const char* kSingleTemplates[3] = {"%1", "%1 can be heard", "the recording features %1"};
const char* kDoubleTemplates[3] = {"%1 followed by %2", "%1 and then %2", "%1 before %2"};
const char* kTripleTemplates[3] = {"%1 followed by %2 and then %3", "%1 then %2 then %3",
                                   "%1 before %2 and %3 at the end"};

std::string fill_template(const char* tpl, const std::vector<std::string>& phrases) {
  std::string out;
  for (const char* p = tpl; *p; ++p) {
    if (*p == '%' && p[1] >= '1' && p[1] <= '9') {
      out += phrases[static_cast<std::size_t>(p[1] - '1')];
      ++p;
    } else {
      out.push_back(*p);
    }
  }
  return out;
}

}  // namespace

SceneResult mix_scene(const std::vector<EventSpec>& events, int sample_rate, double clip_dur_min,
                      double clip_dur_max, std::uint64_t seed) {
  if (events.empty()) throw ConfigError("mix_scene: empty event list");
  if (events.size() > 3) throw ConfigError("mix_scene: at most 3 events per scene");
  Rng rng(seed);
  const double clip_dur = rng.uniform(clip_dur_min, clip_dur_max);
  const std::size_t n = static_cast<std::size_t>(clip_dur * sample_rate);

  struct Placed {
    std::size_t offset;
    std::size_t index;
  };
  std::vector<Placed> placed;
  SceneResult scene;
  scene.clip.sample_rate = sample_rate;
  scene.clip.samples.assign(n, 0.0);

  for (std::size_t i = 0; i < events.size(); ++i) {
    Rng ev_rng = rng.fork(i);
    audiofront::AudioClip ev = synth_event(events[i], sample_rate, ev_rng.next_u64());
    if (ev.samples.size() > n) ev.samples.resize(n);
    const std::size_t max_off = n - ev.samples.size();
    const std::size_t off =
        static_cast<std::size_t>(ev_rng.uniform_int(0, static_cast<std::int64_t>(max_off)));
    for (std::size_t j = 0; j < ev.samples.size(); ++j) scene.clip.samples[off + j] += ev.samples[j];
    placed.push_back({off, i});
  }

  double peak = 0.0;
  for (double v : scene.clip.samples) peak = std::max(peak, std::fabs(v));
  if (peak > 0.9)
    for (auto& v : scene.clip.samples) v *= 0.9 / peak;

  std::stable_sort(placed.begin(), placed.end(),
                   [](const Placed& a, const Placed& b) { return a.offset < b.offset; });

  std::vector<std::string> phrases;
  for (const auto& p : placed) {
    scene.temporal_order.push_back(events[p.index].event_id);
    const auto& variants = events[p.index].phrases;
    phrases.push_back(
        variants[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(variants.size()) - 1))]);
  }
  const std::size_t tsel =
      static_cast<std::size_t>(rng.uniform_int(0, 2));
  const char* tpl = events.size() == 1   ? kSingleTemplates[tsel]
                    : events.size() == 2 ? kDoubleTemplates[tsel]
                                         : kTripleTemplates[tsel];
  scene.caption = fill_template(tpl, phrases);

  std::set<std::string> tagset(scene.temporal_order.begin(), scene.temporal_order.end());
  scene.tags.assign(tagset.begin(), tagset.end());
  return scene;
}

namespace {

std::vector<const EventSpec*> pick_events(const std::vector<const EventSpec*>& pool,
                                          double p_one, double p_two, Rng& rng) {
  const double u = rng.uniform();
  std::size_t k = u < p_one ? 1 : (u < p_one + p_two ? 2 : 3);
  k = std::min(k, pool.size());
  std::vector<std::size_t> idx(pool.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  rng.shuffle(idx);
  std::vector<const EventSpec*> chosen;
  for (std::size_t i = 0; i < k; ++i) chosen.push_back(pool[idx[i]]);
  return chosen;
}

std::string zero_pad(std::size_t v, int width) {
  std::string s = std::to_string(v);
  while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
  return s;
}

}  // namespace

GeneratedCorpora generate_corpus(const EventRegistry& registry, const CorpusConfig& cfg,
                                 std::uint64_t seed, const std::string& wav_dir) {
  if (cfg.n_train == 0 || cfg.n_val == 0 || cfg.n_test == 0 || cfg.n_tag_only == 0)
    throw ConfigError("generate_corpus: all corpus counts must be positive");
  std::vector<const EventSpec*> caption_pool;
  std::vector<const EventSpec*> full_pool;
  for (const auto& e : registry.events()) {
    full_pool.push_back(&e);
    if (std::find(cfg.tag_holdout.begin(), cfg.tag_holdout.end(), e.event_id) ==
        cfg.tag_holdout.end())
      caption_pool.push_back(&e);
  }
  for (const auto& h : cfg.tag_holdout)
    if (!registry.has(h)) throw ConfigError("generate_corpus: holdout tag " + h + " not in registry");
  if (caption_pool.empty())
    throw ConfigError("generate_corpus: tag holdout covers every event in the registry");

  std::filesystem::create_directories(wav_dir);
  Rng master(seed);
  Rng cap_rng = master.fork(1);
  Rng tag_rng = master.fork(2);

  GeneratedCorpora out;
  const std::size_t n_cap = cfg.n_train + cfg.n_val + cfg.n_test;
  std::set<std::string> used_eval_captions;
  for (std::size_t i = 0; i < n_cap; ++i) {
    const std::string split =
        i < cfg.n_train ? "train" : (i < cfg.n_train + cfg.n_val ? "val" : "test");
    Rng item_rng = cap_rng.fork(i);
    SceneResult scene;
    for (int attempt = 0; attempt < 64; ++attempt) {
      Rng attempt_rng = item_rng.fork(static_cast<std::uint64_t>(attempt));
      std::vector<const EventSpec*> chosen =
          pick_events(caption_pool, cfg.p_one, cfg.p_two, attempt_rng);
      std::vector<EventSpec> specs;
      for (auto* p : chosen) specs.push_back(*p);
      scene = mix_scene(specs, cfg.sample_rate, cfg.clip_dur_min, cfg.clip_dur_max,
                        attempt_rng.next_u64());
      if (!cfg.unique_eval_captions || split == "train" ||
          !used_eval_captions.count(scene.caption))
        break;
    }
    if (cfg.unique_eval_captions && split != "train") used_eval_captions.insert(scene.caption);

    AudioTextExample ex;
    ex.clip_id = "cap_" + zero_pad(i, 6);
    ex.caption = scene.caption;
    ex.tags = scene.tags;
    ex.split = split;
    ex.provenance = "human-style";
    ex.wav_path = (std::filesystem::path(wav_dir) / (ex.clip_id + ".wav")).string();
    scene.clip.id = ex.clip_id;
    audiofront::save_wav(ex.wav_path, scene.clip);
    out.caption.items.push_back(std::move(ex));
  }

  for (std::size_t i = 0; i < cfg.n_tag_only; ++i) {
    Rng item_rng = tag_rng.fork(i);
    const double t1 = cfg.tagonly_p_one >= 0 ? cfg.tagonly_p_one : cfg.p_one;
    const double t2 = cfg.tagonly_p_two >= 0 ? cfg.tagonly_p_two : cfg.p_two;
    std::vector<const EventSpec*> chosen = pick_events(full_pool, t1, t2, item_rng);
    std::vector<EventSpec> specs;
    for (auto* p : chosen) specs.push_back(*p);
    SceneResult scene = mix_scene(specs, cfg.sample_rate, cfg.clip_dur_min, cfg.clip_dur_max,
                                  item_rng.next_u64());
    AudioTextExample ex;
    ex.clip_id = "tag_" + zero_pad(i, 6);
    ex.caption.clear();
    ex.tags = scene.tags;
    ex.split = "train";
    ex.provenance = "human-style";
    ex.wav_path = (std::filesystem::path(wav_dir) / (ex.clip_id + ".wav")).string();
    scene.clip.id = ex.clip_id;
    audiofront::save_wav(ex.wav_path, scene.clip);
    out.tag_only.items.push_back(std::move(ex));
  }
  return out;
}

Corpus generate_single_event_set(const EventRegistry& registry,
                                 const std::vector<std::string>& class_ids,
                                 std::size_t per_class, int sample_rate, std::uint64_t seed,
                                 const std::string& wav_dir, const std::string& id_prefix) {
  if (class_ids.empty() || per_class == 0)
    throw ConfigError("generate_single_event_set: empty class set or zero per_class");
  std::filesystem::create_directories(wav_dir);
  Rng master(seed);
  Corpus out;
  std::size_t idx = 0;
  for (std::size_t r = 0; r < per_class; ++r)
    for (const auto& cid : class_ids) {
      Rng item_rng = master.fork(idx);
      SceneResult scene =
          mix_scene({registry.by_id(cid)}, sample_rate, 2.0, 3.0, item_rng.next_u64());
      AudioTextExample ex;
      ex.clip_id = id_prefix + "_" + zero_pad(idx, 6);
      ex.caption = scene.caption;
      ex.tags = {cid};
      ex.split = "test";
      ex.provenance = "human-style";
      ex.wav_path = (std::filesystem::path(wav_dir) / (ex.clip_id + ".wav")).string();
      scene.clip.id = ex.clip_id;
      audiofront::save_wav(ex.wav_path, scene.clip);
      out.items.push_back(std::move(ex));
      ++idx;
    }
  return out;
}

std::vector<const AudioTextExample*> Corpus::split(const std::string& which) const {
  std::vector<const AudioTextExample*> out;
  for (const auto& it : items)
    if (it.split == which) out.push_back(&it);
  return out;
}

std::vector<std::string> Corpus::tag_set() const {
  std::set<std::string> tags;
  for (const auto& it : items) tags.insert(it.tags.begin(), it.tags.end());
  return {tags.begin(), tags.end()};
}

std::vector<std::string> recover_tags(const std::string& caption, const EventRegistry& registry) {
  const std::vector<std::string> words = textproc::normalize_words(caption);
  auto contains_run = [&](const std::vector<std::string>& needle) {
    if (needle.empty() || needle.size() > words.size()) return false;
    for (std::size_t i = 0; i + needle.size() <= words.size(); ++i) {
      bool ok = true;
      for (std::size_t j = 0; j < needle.size(); ++j)
        if (words[i + j] != needle[j]) {
          ok = false;
          break;
        }
      if (ok) return true;
    }
    return false;
  };
  std::vector<std::string> found;
  for (const auto& e : registry.events())
    for (const auto& phrase : e.phrases)
      if (contains_run(textproc::normalize_words(phrase))) {
        found.push_back(e.event_id);
        break;
      }
  return found;
}

void write_manifest(const std::string& path, const Corpus& corpus) {
  std::ofstream of(path);
  if (!of) throw ParseError("write_manifest: cannot open " + path + " for writing");
  for (const auto& it : corpus.items) {
    nlohmann::json j;
    j["clip_id"] = it.clip_id;
    j["wav_path"] = it.wav_path;
    j["caption"] = it.caption;
    j["tags"] = it.tags;
    j["split"] = it.split;
    j["provenance"] = it.provenance;
    of << j.dump() << "\n";
  }
}

Corpus read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("read_manifest: cannot open " + path);
  Corpus corpus;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("read_manifest: " + path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    AudioTextExample ex;
    ex.clip_id = j.at("clip_id").get<std::string>();
    ex.wav_path = j.at("wav_path").get<std::string>();
    ex.caption = j.value("caption", std::string());
    ex.tags = j.at("tags").get<std::vector<std::string>>();
    ex.split = j.value("split", std::string("train"));
    ex.provenance = j.value("provenance", std::string("human-style"));
    if (ex.tags.empty())
      throw DataError("read_manifest: item " + ex.clip_id + " has an empty tag set");
    corpus.items.push_back(std::move(ex));
  }
  return corpus;
}

}  // namespace audiolab::toygen
