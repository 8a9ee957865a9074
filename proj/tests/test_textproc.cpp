// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "audiolab/textproc/text.hpp"

using namespace audiolab;
using namespace audiolab::textproc;

TEST_CASE("build_vocab keeps tokens above min_count and is deterministic") {
  const std::vector<std::string> caps = {"a tone", "a tone rings"};
  Vocabulary v1 = build_vocab(caps, 1);
  CHECK(v1.size() == 4 + 3);  // reserved + {a, tone, rings}
  CHECK(v1.contains("a"));
  CHECK(v1.contains("tone"));
  CHECK(v1.contains("rings"));

  Vocabulary v2 = build_vocab(caps, 2);
  CHECK(v2.size() == 4 + 2);
  CHECK(v2.contains("a"));
  CHECK(v2.contains("tone"));
  CHECK(v2.lookup("rings") == Vocabulary::kUnk);

  // ordering: count desc, token asc; identical across runs
  Vocabulary v3 = build_vocab(caps, 1);
  CHECK(v1.tokens() == v3.tokens());
  CHECK(v1.token(4) == "a");     // count 2
  CHECK(v1.token(5) == "tone");  // count 2, 'a' < 'tone'
  CHECK(v1.token(6) == "rings");

  CHECK_THROWS_AS(build_vocab({}, 1), ConfigError);
}

TEST_CASE("tokenize folds case, handles empty text and OOV") {
  Vocabulary v = build_vocab({"a tone"}, 1);
  TokenSequence s = tokenize("A Tone", v);
  REQUIRE(s.ids.size() == 2);
  CHECK(s.ids[0] == v.lookup("a"));
  CHECK(s.ids[1] == v.lookup("tone"));

  CHECK(tokenize("", v).ids.empty());

  TokenSequence u = tokenize("xyzzy tone", v);
  CHECK(u.ids[0] == Vocabulary::kUnk);
  CHECK(u.ids[1] == v.lookup("tone"));
}

TEST_CASE("label_to_text replaces underscores with blanks") {
  CHECK(label_to_text("dog_barking") == "dog barking");
  CHECK(label_to_text("Speech") == "Speech");
  CHECK(label_to_text("water_tap_faucet") == "water tap faucet");
  CHECK_THROWS_AS(label_to_text(""), ConfigError);
}

TEST_CASE("tokenize(detokenize(seq)) round trips in-vocabulary sequences") {
  Vocabulary v = build_vocab({"a low tone followed by noise", "a high tone"}, 1);
  Rng rng(41);
  for (int trial = 0; trial < 50; ++trial) {
    TokenSequence seq;
    const std::size_t len = static_cast<std::size_t>(rng.uniform_int(1, 8));
    for (std::size_t i = 0; i < len; ++i)
      seq.ids.push_back(static_cast<std::size_t>(rng.uniform_int(4, static_cast<std::int64_t>(v.size()) - 1)));
    TokenSequence rt = tokenize(detokenize(seq, v), v);
    CHECK(rt.ids == seq.ids);
  }
}

TEST_CASE("vocabulary file round trip preserves indices") {
  Vocabulary v = build_vocab({"one two two three three three"}, 1);
  const std::string path =
      (std::filesystem::temp_directory_path() / "textproc_vocab.txt").string();
  save_vocab(path, v);
  Vocabulary r = load_vocab(path);
  CHECK(r.tokens() == v.tokens());
  CHECK(r.lookup("three") == v.lookup("three"));
  std::remove(path.c_str());
}
