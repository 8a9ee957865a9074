// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "audiolab/common.hpp"

namespace audiolab::textproc {

// Word-level vocabulary with four reserved tokens at fixed indices.
class Vocabulary {
public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kBos = 1;
  static constexpr std::size_t kEos = 2;
  static constexpr std::size_t kUnk = 3;

  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> tokens);

  std::size_t size() const { return tokens_.size(); }
  std::size_t lookup(const std::string& token) const;  // kUnk when missing
  const std::string& token(std::size_t id) const;
  bool contains(const std::string& token) const { return index_.count(token) > 0; }

  const std::vector<std::string>& tokens() const { return tokens_; }

private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct TokenSequence {
  std::vector<std::size_t> ids;
  std::size_t length() const { return ids.size(); }
};

// Lowercases, maps punctuation to spaces, splits on whitespace.
std::vector<std::string> normalize_words(const std::string& text);

// Tokens with count >= min_count, indexed by (count desc, token asc) after
// the reserved entries. Pure function of (captions, min_count).
Vocabulary build_vocab(const std::vector<std::string>& captions, std::size_t min_count);

TokenSequence tokenize(const std::string& text, const Vocabulary& vocab);
std::string detokenize(const TokenSequence& seq, const Vocabulary& vocab);

// Zero-shot label preparation: every underscore becomes a single blank.
std::string label_to_text(const std::string& label);

// Plain-text vocabulary file, one token per line, line number = index.
void save_vocab(const std::string& path, const Vocabulary& vocab);
Vocabulary load_vocab(const std::string& path);

}  // namespace audiolab::textproc
