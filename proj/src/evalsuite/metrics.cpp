// SPDX-License-Identifier: Apache-2.0

#include "audiolab/evalsuite/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace audiolab::evalsuite {

double recall_at_k(const std::vector<double>& similarity, std::size_t n, std::size_t k,
                   Direction dir) {
  if (n == 0 || similarity.size() != n * n)
    throw ShapeError("recall_at_k: expected a square similarity matrix");
  if (k < 1 || k > n)
    throw ConfigError("recall_at_k: K = " + std::to_string(k) + " out of range for N = " +
                      std::to_string(n));
  std::size_t hits = 0;
  for (std::size_t q = 0; q < n; ++q) {
    auto score = [&](std::size_t item) {
      return dir == Direction::kAudioToText ? similarity[q * n + item] : similarity[item * n + q];
    };
    const double own = score(q);
    std::size_t rank = 1;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == q) continue;
      if (score(j) > own || (score(j) == own && j < q)) ++rank;
    }
    if (rank <= k) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(n);
}

double mean_average_precision(const std::vector<double>& scores, const std::vector<int>& truths,
                              std::size_t items, std::size_t classes,
                              std::vector<std::size_t>* excluded_classes) {
  if (scores.size() != items * classes || truths.size() != items * classes)
    throw ShapeError("mean_average_precision: scores/truths must both be [items, classes]");
  bool any_positive = false;
  for (int t : truths)
    if (t != 0) { any_positive = true; break; }
  if (!any_positive)
    throw EvalError("mean_average_precision: truth matrix has no positives");

  double ap_sum = 0.0;
  std::size_t counted = 0;
  std::vector<std::size_t> order(items);
  for (std::size_t c = 0; c < classes; ++c) {
    std::size_t positives = 0;
    for (std::size_t i = 0; i < items; ++i) positives += truths[i * classes + c] != 0 ? 1 : 0;
    if (positives == 0) {
      if (excluded_classes) excluded_classes->push_back(c);
      continue;
    }
    for (std::size_t i = 0; i < items; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const double sa = scores[a * classes + c], sb = scores[b * classes + c];
      return sa != sb ? sa > sb : a < b;
    });
    double ap = 0.0;
    std::size_t seen_pos = 0;
    for (std::size_t rank = 0; rank < items; ++rank)
      if (truths[order[rank] * classes + c] != 0) {
        ++seen_pos;
        ap += static_cast<double>(seen_pos) / static_cast<double>(rank + 1);
      }
    ap_sum += ap / static_cast<double>(positives);
    ++counted;
  }
  return ap_sum / static_cast<double>(counted);
}

namespace {

using NgramCounts = std::map<std::vector<std::string>, std::size_t>;

NgramCounts count_ngrams(const Sentence& s, std::size_t n) {
  NgramCounts counts;
  if (s.size() >= n)
    for (std::size_t i = 0; i + n <= s.size(); ++i)
      ++counts[std::vector<std::string>(s.begin() + static_cast<std::ptrdiff_t>(i),
                                        s.begin() + static_cast<std::ptrdiff_t>(i + n))];
  return counts;
}

std::size_t lcs_length(const Sentence& a, const Sentence& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

}  // namespace

double bleu4(const Sentence& candidate, const std::vector<Sentence>& references) {
  if (references.empty()) throw EvalError("bleu4: need at least one reference");
  if (candidate.empty()) return 0.0;

  double log_prec_sum = 0.0;
  for (std::size_t n = 1; n <= 4; ++n) {
    const NgramCounts cand = count_ngrams(candidate, n);
    NgramCounts max_ref;
    for (const auto& ref : references)
      for (const auto& [gram, cnt] : count_ngrams(ref, n))
        max_ref[gram] = std::max(max_ref[gram], cnt);
    std::size_t clipped = 0, total = 0;
    for (const auto& [gram, cnt] : cand) {
      total += cnt;
      auto it = max_ref.find(gram);
      if (it != max_ref.end()) clipped += std::min(cnt, it->second);
    }
    if (total == 0 || clipped == 0) return 0.0;
    log_prec_sum += std::log(static_cast<double>(clipped) / static_cast<double>(total));
  }

  // closest reference length; equal distance resolves to the shorter one
  const std::size_t c = candidate.size();
  std::size_t r = references[0].size();
  for (const auto& ref : references) {
    const auto da = ref.size() > c ? ref.size() - c : c - ref.size();
    const auto db = r > c ? r - c : c - r;
    if (da < db || (da == db && ref.size() < r)) r = ref.size();
  }
  const double bp =
      c >= r ? 1.0 : std::exp(1.0 - static_cast<double>(r) / static_cast<double>(c));
  return bp * std::exp(log_prec_sum / 4.0);
}

double rouge_l(const Sentence& candidate, const std::vector<Sentence>& references) {
  if (references.empty()) throw EvalError("rouge_l: need at least one reference");
  if (candidate.empty()) return 0.0;
  const double beta = 1.2;
  double prec_max = 0.0, rec_max = 0.0;
  for (const auto& ref : references) {
    if (ref.empty()) continue;
    const double lcs = static_cast<double>(lcs_length(ref, candidate));
    prec_max = std::max(prec_max, lcs / static_cast<double>(candidate.size()));
    rec_max = std::max(rec_max, lcs / static_cast<double>(ref.size()));
  }
  if (prec_max == 0.0 || rec_max == 0.0) return 0.0;
  return ((1.0 + beta * beta) * prec_max * rec_max) / (rec_max + beta * beta * prec_max);
}

std::vector<double> cider(const std::vector<Sentence>& candidates,
                          const std::vector<std::vector<Sentence>>& references) {
  if (candidates.size() != references.size())
    throw ShapeError("cider: candidate/reference counts differ");
  if (candidates.size() < 2)
    throw EvalError("cider: document-frequency statistics need a corpus of >= 2 items");
  constexpr std::size_t kN = 4;
  constexpr double kSigma = 6.0;

  // document frequency over each item's reference set
  std::map<std::vector<std::string>, double> df;
  for (const auto& refs : references) {
    std::map<std::vector<std::string>, bool> seen;
    for (const auto& ref : refs)
      for (std::size_t n = 1; n <= kN; ++n)
        for (const auto& [gram, cnt] : count_ngrams(ref, n)) seen[gram] = true;
    for (const auto& [gram, unused] : seen) df[gram] += 1.0;
  }
  const double log_ref_len = std::log(static_cast<double>(references.size()));

  struct Vec {
    std::array<std::map<std::vector<std::string>, double>, kN> v;
    std::array<double, kN> norm{};
    double length = 0.0;  // bigram count, per the COCO scorer
  };
  auto to_vec = [&](const Sentence& s) {
    Vec out;
    for (std::size_t n = 1; n <= kN; ++n)
      for (const auto& [gram, cnt] : count_ngrams(s, n)) {
        const double idf = log_ref_len - std::log(std::max(1.0, df.count(gram) ? df.at(gram) : 0.0));
        out.v[n - 1][gram] = static_cast<double>(cnt) * idf;
        out.norm[n - 1] += out.v[n - 1][gram] * out.v[n - 1][gram];
        if (n == 2) out.length += static_cast<double>(cnt);
      }
    for (auto& x : out.norm) x = std::sqrt(x);
    return out;
  };

  std::vector<double> scores;
  scores.reserve(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (references[i].empty()) throw EvalError("cider: item " + std::to_string(i) + " has no references");
    const Vec hyp = to_vec(candidates[i]);
    std::array<double, kN> acc{};
    for (const auto& ref : references[i]) {
      const Vec rv = to_vec(ref);
      const double delta = hyp.length - rv.length;
      const double len_pen = std::exp(-(delta * delta) / (2.0 * kSigma * kSigma));
      for (std::size_t n = 0; n < kN; ++n) {
        double dot = 0.0;
        for (const auto& [gram, hv] : hyp.v[n]) {
          auto it = rv.v[n].find(gram);
          if (it != rv.v[n].end()) dot += std::min(hv, it->second) * it->second;
        }
        if (hyp.norm[n] != 0.0 && rv.norm[n] != 0.0) dot /= hyp.norm[n] * rv.norm[n];
        acc[n] += dot * len_pen;
      }
    }
    double mean_over_n = 0.0;
    for (std::size_t n = 0; n < kN; ++n) mean_over_n += acc[n];
    mean_over_n /= static_cast<double>(kN);
    scores.push_back(10.0 * mean_over_n / static_cast<double>(references[i].size()));
  }
  return scores;
}

CorpusMetric mean_bleu4() {
  return [](const std::vector<Sentence>& cands, const std::vector<std::vector<Sentence>>& refs) {
    double acc = 0.0;
    for (std::size_t i = 0; i < cands.size(); ++i) acc += bleu4(cands[i], refs[i]);
    return acc / static_cast<double>(cands.size());
  };
}

CorpusMetric mean_rouge_l() {
  return [](const std::vector<Sentence>& cands, const std::vector<std::vector<Sentence>>& refs) {
    double acc = 0.0;
    for (std::size_t i = 0; i < cands.size(); ++i) acc += rouge_l(cands[i], refs[i]);
    return acc / static_cast<double>(cands.size());
  };
}

CorpusMetric mean_cider() {
  return [](const std::vector<Sentence>& cands, const std::vector<std::vector<Sentence>>& refs) {
    const auto s = cider(cands, refs);
    double acc = 0.0;
    for (double v : s) acc += v;
    return acc / static_cast<double>(s.size());
  };
}

double round_robin_eval(const std::vector<std::vector<Sentence>>& references,
                        const CorpusMetric& metric) {
  if (references.empty()) throw DataError("round_robin_eval: no items");
  const std::size_t rounds = references[0].size();
  if (rounds < 2) throw DataError("round_robin_eval: need >= 2 references per item");
  for (const auto& refs : references)
    if (refs.size() != rounds)
      throw DataError("round_robin_eval: items must carry the same reference count");

  double acc = 0.0;
  for (std::size_t r = 0; r < rounds; ++r) {
    std::vector<Sentence> cands;
    std::vector<std::vector<Sentence>> rest;
    cands.reserve(references.size());
    rest.reserve(references.size());
    for (const auto& refs : references) {
      cands.push_back(refs[r]);
      std::vector<Sentence> others;
      for (std::size_t j = 0; j < rounds; ++j)
        if (j != r) others.push_back(refs[j]);
      rest.push_back(std::move(others));
    }
    acc += metric(cands, rest);
  }
  return acc / static_cast<double>(rounds);
}

}  // namespace audiolab::evalsuite
