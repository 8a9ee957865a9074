// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "audiolab/evalsuite/evalsuite.hpp"
#include "audiolab/evalsuite/metrics.hpp"
#include "audiolab/toygen/toygen.hpp"

using namespace audiolab;
using namespace audiolab::evalsuite;

namespace {

Sentence words(const std::string& text) { return textproc::normalize_words(text); }

// straight-from-formula AP by explicit enumeration (test-only oracle)
double brute_force_ap(const std::vector<double>& scores, const std::vector<int>& truth) {
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] != scores[b] ? scores[a] > scores[b] : a < b;
  });
  double ap = 0.0;
  std::size_t hits = 0, positives = 0;
  for (int t : truth) positives += t != 0 ? 1 : 0;
  for (std::size_t r = 0; r < n; ++r)
    if (truth[order[r]] != 0) {
      ++hits;
      ap += static_cast<double>(hits) / static_cast<double>(r + 1);
    }
  return ap / static_cast<double>(positives);
}

}  // namespace

TEST_CASE("recall@k fixtures: identity, constructed second-highest, tie break") {
  const std::size_t n = 10;
  std::vector<double> eye(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) eye[i * n + i] = 1.0;
  CHECK(recall_at_k(eye, n, 1, Direction::kAudioToText) == 1.0);
  CHECK(recall_at_k(eye, n, 1, Direction::kTextToAudio) == 1.0);

  // every diagonal entry exactly second-highest in its row/column
  std::vector<double> second(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    second[i * n + i] = 0.5;
    second[i * n + (i + 1) % n] = 0.9;
    second[((i + 1) % n) * n + i] = std::max(second[((i + 1) % n) * n + i], 0.0);
  }
  CHECK(recall_at_k(second, n, 1, Direction::kAudioToText) == 0.0);
  CHECK(recall_at_k(second, n, 2, Direction::kAudioToText) == 1.0);

  // all-zero similarities: ascending-index ties, only query 0 wins at K=1
  std::vector<double> zeros(n * n, 0.0);
  CHECK(recall_at_k(zeros, n, 1, Direction::kAudioToText) == doctest::Approx(0.1));

  CHECK_THROWS_AS(recall_at_k(zeros, n, 11, Direction::kAudioToText), ConfigError);
}

TEST_CASE("recall@k is monotone in K with R@N = 1, and rank-transform invariant") {
  Rng rng(3);
  const std::size_t n = 12;
  std::vector<double> s(n * n);
  for (auto& v : s) v = 2.0 * rng.uniform() - 1.0;
  double prev = 0.0;
  for (std::size_t k = 1; k <= n; ++k) {
    const double r = recall_at_k(s, n, k, Direction::kAudioToText);
    CHECK(r >= prev);
    prev = r;
  }
  CHECK(prev == 1.0);

  // strictly increasing transforms leave the rank metrics unchanged
  std::vector<double> t(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) t[i] = std::tanh(3.0 * s[i] + 1.0);
  for (std::size_t k : {std::size_t(1), std::size_t(3), std::size_t(7)}) {
    CHECK(recall_at_k(s, n, k, Direction::kAudioToText) ==
          recall_at_k(t, n, k, Direction::kAudioToText));
    CHECK(recall_at_k(s, n, k, Direction::kTextToAudio) ==
          recall_at_k(t, n, k, Direction::kTextToAudio));
  }
}

TEST_CASE("mAP fixtures and brute-force oracle equivalence") {
  // perfect ranking on every class
  std::vector<double> scores = {0.9, 0.1, 0.8, 0.2, 0.1, 0.9, 0.2, 0.8};
  std::vector<int> truth = {1, 0, 1, 0, 0, 1, 0, 1};
  CHECK(mean_average_precision(scores, truth, 4, 2) == doctest::Approx(1.0));

  // one class, positives at ranks 1 and 3 of 4
  std::vector<double> s1 = {0.9, 0.8, 0.7, 0.6};
  std::vector<int> t1 = {1, 0, 1, 0};
  CHECK(mean_average_precision(s1, t1, 4, 1) == doctest::Approx((1.0 + 2.0 / 3.0) / 2.0));

  // permutation invariance (items permuted together with truths)
  Rng rng(11);
  const std::size_t items = 20, classes = 4;
  std::vector<double> sc(items * classes);
  std::vector<int> tr(items * classes, 0);
  for (auto& v : sc) v = rng.uniform();
  for (std::size_t c = 0; c < classes; ++c)
    for (int rep = 0; rep < 5; ++rep)
      tr[static_cast<std::size_t>(rng.uniform_int(0, items - 1)) * classes + c] = 1;
  const double base = mean_average_precision(sc, tr, items, classes);
  std::vector<std::size_t> perm(items);
  for (std::size_t i = 0; i < items; ++i) perm[i] = i;
  rng.shuffle(perm);
  std::vector<double> sp(items * classes);
  std::vector<int> tp(items * classes);
  for (std::size_t i = 0; i < items; ++i)
    for (std::size_t c = 0; c < classes; ++c) {
      sp[i * classes + c] = sc[perm[i] * classes + c];
      tp[i * classes + c] = tr[perm[i] * classes + c];
    }
  CHECK(mean_average_precision(sp, tp, items, classes) == doctest::Approx(base).epsilon(1e-12));

  // oracle equivalence on random instances up to 50 items
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t ni = static_cast<std::size_t>(rng.uniform_int(3, 50));
    const std::size_t nc = static_cast<std::size_t>(rng.uniform_int(1, 5));
    std::vector<double> rs(ni * nc);
    std::vector<int> rt(ni * nc, 0);
    for (auto& v : rs) v = rng.uniform();
    for (std::size_t c = 0; c < nc; ++c)
      rt[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(ni) - 1)) * nc + c] = 1;
    double expect = 0.0;
    for (std::size_t c = 0; c < nc; ++c) {
      std::vector<double> col(ni);
      std::vector<int> colt(ni);
      for (std::size_t i = 0; i < ni; ++i) {
        col[i] = rs[i * nc + c];
        colt[i] = rt[i * nc + c];
      }
      expect += brute_force_ap(col, colt);
    }
    expect /= static_cast<double>(nc);
    CHECK(mean_average_precision(rs, rt, ni, nc) == doctest::Approx(expect).epsilon(1e-12));
  }

  // zero-positive classes are excluded and reported; all-zero truths error
  std::vector<double> s2 = {0.5, 0.4, 0.3, 0.2};
  std::vector<int> t2 = {1, 0, 0, 0};
  std::vector<std::size_t> excluded;
  CHECK(mean_average_precision(s2, t2, 2, 2, &excluded) == doctest::Approx(1.0));
  CHECK(excluded == std::vector<std::size_t>{1});
  std::vector<int> t3 = {0, 0, 0, 0};
  CHECK_THROWS_AS(mean_average_precision(s2, t3, 2, 2), EvalError);
}

TEST_CASE("bleu-4 fixtures") {
  const Sentence ref = words("a b c d f");
  CHECK(bleu4(ref, {ref}) == doctest::Approx(1.0));
  CHECK(bleu4(words("x y z w v"), {ref}) == 0.0);
  CHECK(bleu4(words("a b c d e"), {ref}) ==
        doctest::Approx(std::pow(0.8 * 0.75 * (2.0 / 3.0) * 0.5, 0.25)).epsilon(1e-9));
  CHECK(bleu4({}, {ref}) == 0.0);  // empty candidate scores zero
}

TEST_CASE("rouge-l fixtures") {
  const Sentence ref = words("a c");
  CHECK(rouge_l(words("a c"), {words("a c")}) == doctest::Approx(1.0));
  CHECK(rouge_l(words("x y"), {ref}) == 0.0);
  // candidate "a b c" vs reference "a c": LCS 2, P = 2/3, R = 1
  const double beta = 1.2;
  const double p = 2.0 / 3.0, r = 1.0;
  const double expect = (1.0 + beta * beta) * p * r / (r + beta * beta * p);
  CHECK(rouge_l(words("a b c"), {ref}) == doctest::Approx(expect).epsilon(1e-9));
  CHECK(expect == doctest::Approx(0.829932).epsilon(1e-5));
}

TEST_CASE("cider: zero overlap, shuffle invariance, independent oracle") {
  std::vector<Sentence> cands = {
      words("a low tone hums softly"), words("noise rushes through the room"),
      words("a sharp buzz rattles"), words("a rising sweep climbs up"),
      words("water drips on metal")};
  std::vector<std::vector<Sentence>> refs = {
      {words("a low tone hums"), words("a deep tone sounds")},
      {words("a rush of noise fills the room"), words("noise rushes loudly")},
      {words("a sharp buzz rattles the desk"), words("a harsh buzz sounds")},
      {words("a rising sweep climbs"), words("an upward sweep rises fast")},
      {words("a quiet tapping repeats"), words("soft taps echo")}};

  const std::vector<double> scores = cider(cands, refs);
  REQUIRE(scores.size() == 5);

  // the last candidate shares no n-gram with its references
  CHECK(scores[4] == doctest::Approx(0.0).epsilon(1e-12));

  // shuffling corpus order leaves per-item scores attached to their items
  std::vector<std::size_t> perm = {3, 0, 4, 1, 2};
  std::vector<Sentence> c2;
  std::vector<std::vector<Sentence>> r2;
  for (std::size_t i : perm) {
    c2.push_back(cands[i]);
    r2.push_back(refs[i]);
  }
  const std::vector<double> shuffled = cider(c2, r2);
  for (std::size_t i = 0; i < perm.size(); ++i)
    CHECK(shuffled[i] == doctest::Approx(scores[perm[i]]).epsilon(1e-12));

  // independent straight-from-formula oracle (flat vectors, no shared code)
  auto ngrams_of = [](const Sentence& s, std::size_t n) {
    std::vector<std::string> grams;
    for (std::size_t i = 0; i + n <= s.size(); ++i) {
      std::string g;
      for (std::size_t j = 0; j < n; ++j) g += s[i + j] + "\x1f";
      grams.push_back(g);
    }
    return grams;
  };
  auto count_of = [&](const std::vector<std::string>& grams, const std::string& g) {
    std::size_t c = 0;
    for (const auto& x : grams) c += x == g;
    return static_cast<double>(c);
  };
  const double n_items = static_cast<double>(refs.size());
  for (std::size_t item = 0; item < cands.size(); ++item) {
    double mean_n = 0.0;
    for (std::size_t n = 1; n <= 4; ++n) {
      double acc = 0.0;
      for (const auto& ref : refs[item]) {
        const auto cg = ngrams_of(cands[item], n);
        const auto rg = ngrams_of(ref, n);
        // collect distinct grams of both sentences
        std::vector<std::string> uniq;
        for (const auto& g : cg)
          if (std::find(uniq.begin(), uniq.end(), g) == uniq.end()) uniq.push_back(g);
        for (const auto& g : rg)
          if (std::find(uniq.begin(), uniq.end(), g) == uniq.end()) uniq.push_back(g);
        double dot = 0.0, nh = 0.0, nr = 0.0;
        for (const auto& g : uniq) {
          double dfc = 0.0;
          for (const auto& rset : refs) {
            bool seen = false;
            for (const auto& r : rset)
              for (const auto& x : ngrams_of(r, n))
                if (x == g) seen = true;
            dfc += seen ? 1.0 : 0.0;
          }
          const double idf = std::log(n_items) - std::log(std::max(1.0, dfc));
          const double hv = count_of(cg, g) * idf;
          const double rv = count_of(rg, g) * idf;
          dot += std::min(hv, rv) * rv;
          nh += hv * hv;
          nr += rv * rv;
        }
        double sim = (nh > 0 && nr > 0) ? dot / (std::sqrt(nh) * std::sqrt(nr)) : 0.0;
        const double lh = cands[item].size() >= 2 ? static_cast<double>(cands[item].size() - 1) : 0.0;
        const double lr = ref.size() >= 2 ? static_cast<double>(ref.size() - 1) : 0.0;
        const double delta = lh - lr;
        sim *= std::exp(-delta * delta / 72.0);  // sigma = 6
        acc += sim;
      }
      mean_n += acc / static_cast<double>(refs[item].size());
    }
    const double oracle = 10.0 * mean_n / 4.0;
    CHECK(scores[item] == doctest::Approx(oracle).epsilon(1e-6));
  }

  CHECK_THROWS_AS(cider({cands[0]}, {refs[0]}), EvalError);
}

TEST_CASE("round robin: identical references, two-reference swap, disjoint reference") {
  // all 5 references identical: self-match value (1.0 for BLEU-4)
  std::vector<std::vector<Sentence>> same(3);
  for (auto& refs : same) refs.assign(5, words("a low tone follows a sharp buzz"));
  CHECK(round_robin_eval(same, mean_bleu4()) == doctest::Approx(1.0));

  // R=2: average of the two swap evaluations
  std::vector<std::vector<Sentence>> two = {
      {words("a b c d e"), words("a b c d f")},
      {words("x y z w q"), words("x y z w r")}};
  auto metric = mean_bleu4();
  const double round0 = metric({two[0][0], two[1][0]}, {{two[0][1]}, {two[1][1]}});
  const double round1 = metric({two[0][1], two[1][1]}, {{two[0][0]}, {two[1][0]}});
  CHECK(round_robin_eval(two, metric) == doctest::Approx(0.5 * (round0 + round1)).epsilon(1e-12));

  // a disjoint reference pulls the average strictly below 1
  std::vector<std::vector<Sentence>> mixed(2);
  mixed[0] = {words("a b c d"), words("a b c d"), words("q w e r")};
  mixed[1] = {words("k l m n"), words("k l m n"), words("k l m n")};
  CHECK(round_robin_eval(mixed, mean_bleu4()) < 1.0);

  std::vector<std::vector<Sentence>> ragged = {{words("a b")}, {words("a b"), words("c d")}};
  CHECK_THROWS_AS(round_robin_eval(ragged, mean_bleu4()), DataError);
}

TEST_CASE("zero-shot from stub embeddings") {
  // one-hot embeddings, clip i matches label i
  std::vector<std::vector<double>> clips = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  std::vector<std::vector<double>> labels = clips;
  ZeroShotResult r = zero_shot_from_embeddings(clips, labels);
  CHECK(r.predictions == std::vector<std::size_t>{0, 1, 2});
  std::vector<std::size_t> truths = {0, 1, 2};
  CHECK(accuracy(r.predictions, truths) == 1.0);

  // duplicated labels produce identical score columns
  std::vector<std::vector<double>> dup = {{1, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  ZeroShotResult r2 = zero_shot_from_embeddings(clips, dup);
  for (std::size_t i = 0; i < clips.size(); ++i)
    CHECK(r2.scores[i * 3 + 0] == r2.scores[i * 3 + 1]);
}

TEST_CASE("bce with all-zero targets and zero logits is ln 2 per class") {
  diff::Tensor logits = diff::Tensor::zeros({4, 3});
  diff::Tensor targets = diff::Tensor::zeros({4, 3});
  CHECK(multi_label_bce(logits, targets).item() == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("metric report: json round trip and wall-clock-independent digest") {
  MetricReport r;
  r.task = "retrieval";
  r.dataset_id = "toy";
  r.checkpoint_id = "stage2";
  r.seed = 7;
  r.metrics = {{"r@1_a2t", 0.61}, {"r@1_t2a", 0.58}};
  r.wall_clock_sec = 12.5;

  MetricReport rt = MetricReport::from_json(r.to_json());
  CHECK(rt.task == r.task);
  CHECK(rt.metrics == r.metrics);

  MetricReport other = r;
  other.wall_clock_sec = 99.0;
  CHECK(other.stable_digest() == r.stable_digest());
  other.metrics["r@1_a2t"] = 0.62;
  CHECK(other.stable_digest() != r.stable_digest());
}
