// SPDX-License-Identifier: Apache-2.0

#include "audiolab/bootstrap/bootstrap.hpp"

#include <algorithm>
#include <set>

namespace audiolab::bootstrap {

toygen::Corpus filter_by_tag_vocab(const toygen::Corpus& tag_only,
                                   const std::vector<std::string>& caption_tag_set,
                                   FilterMode mode, FilterReport* report) {
  const std::set<std::string> known(caption_tag_set.begin(), caption_tag_set.end());
  toygen::Corpus kept;
  for (const auto& item : tag_only.items) {
    std::size_t known_count = 0;
    for (const auto& t : item.tags) known_count += known.count(t);
    const bool keep = mode == FilterMode::kDropIfAnyUnknown ? known_count == item.tags.size()
                                                            : known_count > 0;
    if (keep) kept.items.push_back(item);
  }
  if (report) {
    report->kept = kept.items.size();
    report->dropped = tag_only.items.size() - kept.items.size();
  }
  return kept;
}

toygen::Corpus generate_synthetic_corpus(captioner::CaptionModel& model,
                                         audiofront::FeatureStore& features,
                                         const textproc::Vocabulary& vocab,
                                         const toygen::Corpus& filtered,
                                         std::size_t beam_size, SyntheticReport* report) {
  std::vector<const toygen::AudioTextExample*> items;
  for (const auto& it : filtered.items) items.push_back(&it);
  std::sort(items.begin(), items.end(),
            [](const toygen::AudioTextExample* a, const toygen::AudioTextExample* b) {
              return a->clip_id < b->clip_id;
            });

  toygen::Corpus out;
  std::size_t forced = 0;
  for (const auto* it : items) {
    const auto& mel = features.from_wav(it->clip_id, it->wav_path);
    captioner::BeamHypothesis hyp = model.caption_clip(mel, it->tags, beam_size);
    if (!hyp.finished) ++forced;
    textproc::TokenSequence seq;
    seq.ids = hyp.tokens;
    toygen::AudioTextExample ex = *it;
    ex.caption = textproc::detokenize(seq, vocab);
    ex.provenance = "synthetic";
    out.items.push_back(std::move(ex));
  }
  if (report) {
    report->clips = out.items.size();
    report->forced = forced;
  }
  return out;
}

}  // namespace audiolab::bootstrap
