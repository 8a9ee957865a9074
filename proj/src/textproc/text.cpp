// SPDX-License-Identifier: Apache-2.0

#include "audiolab/textproc/text.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>

namespace audiolab::textproc {

namespace {
const char* kReserved[4] = {"<PAD>", "<BOS>", "<EOS>", "<UNK>"};
}

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  if (tokens_.size() < 4) throw ConfigError("Vocabulary: missing reserved tokens");
  for (std::size_t i = 0; i < 4; ++i)
    if (tokens_[i] != kReserved[i])
      throw ConfigError("Vocabulary: reserved token at index " + std::to_string(i) +
                        " must be " + kReserved[i] + ", got " + tokens_[i]);
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], i).second)
      throw ConfigError("Vocabulary: duplicate token " + tokens_[i]);
  }
}

std::size_t Vocabulary::lookup(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(std::size_t id) const {
  if (id >= tokens_.size())
    throw LookupError("Vocabulary: index " + std::to_string(id) + " out of range");
  return tokens_[id];
}

std::vector<std::string> normalize_words(const std::string& text) {
  std::string norm;
  norm.reserve(text.size());
  for (unsigned char c : text)
    norm.push_back(std::isalnum(c) ? static_cast<char>(std::tolower(c)) : ' ');
  std::vector<std::string> words;
  std::size_t i = 0;
  while (i < norm.size()) {
    while (i < norm.size() && norm[i] == ' ') ++i;
    std::size_t j = i;
    while (j < norm.size() && norm[j] != ' ') ++j;
    if (j > i) words.push_back(norm.substr(i, j - i));
    i = j;
  }
  return words;
}

Vocabulary build_vocab(const std::vector<std::string>& captions, std::size_t min_count) {
  if (captions.empty()) throw ConfigError("build_vocab: empty caption corpus");
  std::map<std::string, std::size_t> counts;  // ordered map for the asc tie-break
  for (const auto& cap : captions)
    for (const auto& w : normalize_words(cap)) ++counts[w];

  std::vector<std::pair<std::string, std::size_t>> kept;
  for (const auto& [tok, cnt] : counts)
    if (cnt >= min_count) kept.emplace_back(tok, cnt);
  std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });

  std::vector<std::string> tokens;
  tokens.reserve(4 + kept.size());
  for (const char* r : kReserved) tokens.emplace_back(r);
  for (auto& [tok, cnt] : kept) tokens.push_back(std::move(tok));
  return Vocabulary(std::move(tokens));
}

TokenSequence tokenize(const std::string& text, const Vocabulary& vocab) {
  TokenSequence seq;
  for (const auto& w : normalize_words(text)) seq.ids.push_back(vocab.lookup(w));
  return seq;
}

std::string detokenize(const TokenSequence& seq, const Vocabulary& vocab) {
  std::string out;
  for (std::size_t id : seq.ids) {
    if (id == Vocabulary::kPad || id == Vocabulary::kBos || id == Vocabulary::kEos) continue;
    if (!out.empty()) out.push_back(' ');
    out += vocab.token(id);
  }
  return out;
}

std::string label_to_text(const std::string& label) {
  if (label.empty()) throw ConfigError("label_to_text: empty label");
  std::string out = label;
  std::replace(out.begin(), out.end(), '_', ' ');
  return out;
}

void save_vocab(const std::string& path, const Vocabulary& vocab) {
  std::ofstream of(path);
  if (!of) throw ParseError("save_vocab: cannot open " + path + " for writing");
  for (const auto& t : vocab.tokens()) of << t << "\n";
}

Vocabulary load_vocab(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("load_vocab: cannot open " + path);
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) tokens.push_back(line);
  return Vocabulary(std::move(tokens));
}

}  // namespace audiolab::textproc
