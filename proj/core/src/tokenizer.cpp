// Copyright 2026 The muco Authors
// SPDX-License-Identifier: Apache-2.0

#include "muco/tokenizer.hpp"

#include <set>

#include "muco/error.hpp"
#include "muco/kvconfig.hpp"
#include "muco/rng.hpp"

namespace muco {

void ChatMarkup::validate() const {
  std::set<std::string_view> seen;
  for (auto tok : tokens()) {
    if (tok.empty()) throw Error(ErrorCode::kInvalidConfig, "markup token is empty");
    if (!seen.insert(tok).second) {
      throw Error(ErrorCode::kInvalidConfig, "markup token repeats: " + std::string(tok));
    }
  }
}

ChatMarkup ChatMarkup::from_config(const KeyValueConfig& cfg) {
  ChatMarkup m;
  m.user_open = cfg.get_string("markup.user_open", m.user_open);
  m.user_close = cfg.get_string("markup.user_close", m.user_close);
  m.assistant_open = cfg.get_string("markup.assistant_open", m.assistant_open);
  m.assistant_close = cfg.get_string("markup.assistant_close", m.assistant_close);
  m.emb_token = cfg.get_string("markup.emb_token", m.emb_token);
  m.mask_token = cfg.get_string("markup.mask_token", m.mask_token);
  m.image_placeholder = cfg.get_string("markup.image_placeholder", m.image_placeholder);
  m.validate();
  return m;
}

Tokenizer::Tokenizer(ChatMarkup markup, std::size_t image_vocab)
    : markup_(std::move(markup)), image_vocab_(image_vocab) {
  markup_.validate();
  if (image_vocab_ == 0) throw Error(ErrorCode::kInvalidConfig, "image_vocab must be >= 1");
}

std::size_t Tokenizer::vocab_size() const {
  return plain_vocab_size() + kSpecialCount + image_vocab_;
}

int Tokenizer::special_id(Special s) const {
  return static_cast<int>(plain_vocab_size()) + static_cast<int>(s);
}

int Tokenizer::image_token_id(std::size_t slot) const {
  return static_cast<int>(plain_vocab_size() + kSpecialCount + slot % image_vocab_);
}

bool Tokenizer::is_image_token(int id) const {
  const auto first = static_cast<int>(plain_vocab_size() + kSpecialCount);
  return id >= first && id < first + static_cast<int>(image_vocab_);
}

std::vector<int> Tokenizer::image_prefix(std::string_view image_id,
                                         std::size_t count) const {
  Rng rng(fnv1a(image_id));
  std::vector<int> ids;
  ids.reserve(count);
  for (std::size_t i = 0; i < count; ++i) ids.push_back(image_token_id(rng.uniform_index(image_vocab_)));
  return ids;
}

bool Tokenizer::contains_reserved(std::string_view text) const {
  for (auto tok : markup_.tokens()) {
    if (text.find(tok) != std::string_view::npos) return true;
  }
  return false;
}

std::vector<int> Tokenizer::encode(std::string_view text) const {
  const auto toks = markup_.tokens();
  std::vector<int> out;
  std::size_t plain_begin = 0;
  std::size_t i = 0;
  while (i < text.size()) {
    // Longest reserved token starting at i.
    int best = -1;
    std::size_t best_len = 0;
    for (std::size_t s = 0; s < toks.size(); ++s) {
      if (toks[s].size() > best_len && text.compare(i, toks[s].size(), toks[s]) == 0) {
        best = static_cast<int>(s);
        best_len = toks[s].size();
      }
    }
    if (best < 0) {
      ++i;
      continue;
    }
    if (i > plain_begin) encode_plain(text.substr(plain_begin, i - plain_begin), out);
    out.push_back(special_id(static_cast<Special>(best)));
    i += best_len;
    plain_begin = i;
  }
  if (plain_begin < text.size()) encode_plain(text.substr(plain_begin), out);
  return out;
}

void ByteTokenizer::encode_plain(std::string_view text, std::vector<int>& out) const {
  for (unsigned char c : text) out.push_back(static_cast<int>(c));
}

WordTokenizer::WordTokenizer(std::vector<std::string> words, ChatMarkup markup,
                             std::size_t image_vocab)
    : Tokenizer(std::move(markup), image_vocab), words_(std::move(words)) {
  for (std::size_t i = 0; i < words_.size(); ++i) {
    if (words_[i].empty() || words_[i].find_first_of(" \t\r\n") != std::string::npos) {
      throw Error(ErrorCode::kInvalidConfig, "vocabulary word must be non-empty without spaces");
    }
    if (!index_.emplace(words_[i], static_cast<int>(i)).second) {
      throw Error(ErrorCode::kInvalidConfig, "vocabulary word repeats: " + words_[i]);
    }
  }
}

void WordTokenizer::encode_plain(std::string_view text, std::vector<int>& out) const {
  constexpr std::string_view kSpace = " \t\r\n";
  std::size_t pos = 0;
  while (true) {
    const auto begin = text.find_first_not_of(kSpace, pos);
    if (begin == std::string_view::npos) return;
    const auto end = std::min(text.find_first_of(kSpace, begin), text.size());
    const std::string word(text.substr(begin, end - begin));
    const auto it = index_.find(word);
    if (it == index_.end()) {
      throw Error(ErrorCode::kTokenizerFailure, "word not in vocabulary: " + word);
    }
    out.push_back(it->second);
    pos = end;
  }
}

}  // namespace muco
