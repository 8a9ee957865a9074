// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "audiolab/common.hpp"

namespace audiolab::evalsuite {

enum class Direction { kAudioToText, kTextToAudio };

// Fraction of queries whose ground-truth match (the diagonal) ranks in the
// top K. Rows are ranked for audio->text, columns for text->audio. Ties
// break by ascending index.
double recall_at_k(const std::vector<double>& similarity, std::size_t n, std::size_t k,
                   Direction dir);

// Macro-averaged AP over classes; scores and truths are [items, classes]
// row-major. Classes without positives are excluded and reported.
double mean_average_precision(const std::vector<double>& scores, const std::vector<int>& truths,
                              std::size_t items, std::size_t classes,
                              std::vector<std::size_t>* excluded_classes = nullptr);

using Sentence = std::vector<std::string>;

// Sentence BLEU-4, COCO conventions: clipped n-gram precision, brevity
// penalty against the closest reference length, zero when any n-gram
// precision is zero.
double bleu4(const Sentence& candidate, const std::vector<Sentence>& references);

// LCS F-measure with beta = 1.2, max over references.
double rouge_l(const Sentence& candidate, const std::vector<Sentence>& references);

// CIDEr-D: TF-IDF weighted cosine over 1..4-grams with a gaussian length
// penalty (sigma 6), averaged over n and references, scaled by 10. Document
// frequencies come from the reference sets; needs >= 2 items.
std::vector<double> cider(const std::vector<Sentence>& candidates,
                          const std::vector<std::vector<Sentence>>& references);

// Corpus-level functional used by the round-robin schedule.
using CorpusMetric = std::function<double(const std::vector<Sentence>& candidates,
                                          const std::vector<std::vector<Sentence>>& references)>;
CorpusMetric mean_bleu4();
CorpusMetric mean_rouge_l();
CorpusMetric mean_cider();

// Reference-only protocol: each round plays one reference as the candidate
// against the remaining ones; per-round corpus scores are averaged.
double round_robin_eval(const std::vector<std::vector<Sentence>>& references,
                        const CorpusMetric& metric);

}  // namespace audiolab::evalsuite
