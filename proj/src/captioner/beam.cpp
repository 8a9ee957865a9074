// SPDX-License-Identifier: Apache-2.0

#include "audiolab/captioner/beam.hpp"

#include <algorithm>

namespace audiolab::captioner {

namespace {

struct Candidate {
  std::vector<std::size_t> tokens;
  double score;
  bool finished;
  std::size_t min_width;  // smallest beam width whose pool generates this candidate
};

bool better(const Candidate& a, const Candidate& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.tokens < b.tokens;
}

}  // namespace

BeamHypothesis beam_search(const StepLogProbs& step, std::size_t vocab_size, std::size_t eos_id,
                           std::size_t beam_size, std::size_t max_len) {
  if (beam_size < 1) throw ConfigError("beam_search: beam_size must be >= 1");
  if (max_len < 2) throw ConfigError("beam_search: max_len must be >= 2");
  if (eos_id >= vocab_size) throw ConfigError("beam_search: eos_id out of vocabulary");

  std::vector<Candidate> pool = {{{}, 0.0, false, 1}};
  for (std::size_t depth = 0; depth < max_len; ++depth) {
    bool all_finished = true;
    for (const auto& h : pool)
      if (!h.finished) { all_finished = false; break; }
    if (all_finished) break;

    std::vector<Candidate> cands;
    cands.reserve(pool.size() * (vocab_size + 1));
    for (std::size_t rank = 0; rank < pool.size(); ++rank) {
      const Candidate& h = pool[rank];
      const std::size_t mw = std::max<std::size_t>(rank + 1, h.min_width);
      if (h.finished) {
        cands.push_back({h.tokens, h.score, true, mw});
        continue;
      }
      const std::vector<double> lp = step(h.tokens);
      if (lp.size() != vocab_size)
        throw ShapeError("beam_search: step returned " + std::to_string(lp.size()) +
                         " log-probs, expected " + std::to_string(vocab_size));
      for (std::size_t tok = 0; tok < vocab_size; ++tok) {
        Candidate c;
        c.tokens = h.tokens;
        c.tokens.push_back(tok);
        c.score = h.score + lp[tok];
        c.finished = tok == eos_id;
        c.min_width = mw;
        cands.push_back(std::move(c));
      }
    }

    // nested reselection: width w picks the best unchosen candidate whose
    // parent survives at width <= w
    std::vector<char> chosen(cands.size(), 0);
    std::vector<Candidate> next;
    next.reserve(beam_size);
    for (std::size_t w = 1; w <= beam_size; ++w) {
      std::ptrdiff_t best = -1;
      for (std::size_t i = 0; i < cands.size(); ++i) {
        if (chosen[i] || cands[i].min_width > w) continue;
        if (best < 0 || better(cands[i], cands[static_cast<std::size_t>(best)]))
          best = static_cast<std::ptrdiff_t>(i);
      }
      if (best < 0) break;
      chosen[static_cast<std::size_t>(best)] = 1;
      Candidate kept = cands[static_cast<std::size_t>(best)];
      kept.min_width = w;
      next.push_back(std::move(kept));
    }
    pool = std::move(next);
  }

  const Candidate* best = nullptr;
  for (const auto& h : pool)
    if (!best || better(h, *best)) best = &h;
  if (!best) throw StateError("beam_search: empty hypothesis pool");
  BeamHypothesis out;
  out.tokens = best->tokens;
  out.score = best->score;
  out.finished = !best->tokens.empty() && best->tokens.back() == eos_id;
  return out;
}

BeamHypothesis greedy_decode(const StepLogProbs& step, std::size_t vocab_size, std::size_t eos_id,
                             std::size_t max_len) {
  BeamHypothesis hyp;
  for (std::size_t depth = 0; depth < max_len; ++depth) {
    const std::vector<double> lp = step(hyp.tokens);
    std::size_t best = 0;
    for (std::size_t tok = 1; tok < vocab_size; ++tok)
      if (lp[tok] > lp[best]) best = tok;
    hyp.tokens.push_back(best);
    hyp.score += lp[best];
    if (best == eos_id) {
      hyp.finished = true;
      break;
    }
  }
  return hyp;
}

}  // namespace audiolab::captioner
