// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "audiolab/common.hpp"

namespace audiolab::captioner {

struct BeamHypothesis {
  std::vector<std::size_t> tokens;  // chosen tokens, EOS included when reached
  double score = 0.0;               // sum of stepwise log-probabilities
  bool finished = false;            // true iff the last token is EOS
};

// Log-probabilities of the next token given the tokens chosen so far.
using StepLogProbs = std::function<std::vector<double>(const std::vector<std::size_t>& prefix)>;

// Width-nested beam search. Each step expands the pool and reselects it so
// that the pool kept at width w is always a subset of the pool at width w+1
// (a hypothesis is tagged with the smallest width that retains its parent).
// This keeps the best final score non-decreasing in beam_size, makes width 1
// coincide with greedy decoding, and makes a full-width beam exhaustive.
// Hypotheses reaching max_len without EOS are force-finished; the best
// hypothesis by (score, lexicographic tokens) is returned.
BeamHypothesis beam_search(const StepLogProbs& step, std::size_t vocab_size, std::size_t eos_id,
                           std::size_t beam_size, std::size_t max_len);

// Argmax chain until EOS or max_len (reference implementation for tests).
BeamHypothesis greedy_decode(const StepLogProbs& step, std::size_t vocab_size, std::size_t eos_id,
                             std::size_t max_len);

}  // namespace audiolab::captioner
