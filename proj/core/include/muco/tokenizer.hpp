// Copyright 2026 The muco Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace muco {

class KeyValueConfig;

// Role tags and reserved tokens used to lay out dialogues.
struct ChatMarkup {
  std::string user_open = "<|user|>";
  std::string user_close = "<|end_user|>";
  std::string assistant_open = "<|assistant|>";
  std::string assistant_close = "<|end_assistant|>";
  std::string emb_token = "<|emb|>";
  std::string mask_token = "<|mask|>";
  std::string image_placeholder = "<|image|>";

  // Non-empty, pairwise distinct.
  void validate() const;

  std::array<std::string_view, 7> tokens() const {
    return {user_open, user_close, assistant_open, assistant_close,
            emb_token, mask_token, image_placeholder};
  }

  // Reads `markup.*` keys, keeping defaults for anything missing.
  static ChatMarkup from_config(const KeyValueConfig& cfg);
};

enum class Special : int {
  kUserOpen = 0,
  kUserClose,
  kAssistantOpen,
  kAssistantClose,
  kEmb,
  kMask,
  kImage,
};
inline constexpr std::size_t kSpecialCount = 7;

// Pluggable text -> id mapping. Reserved markup strings are recognized anywhere
// in the input and mapped to their own ids; the remaining text is handed to
// encode_plain(). Id layout: [plain vocabulary][7 specials][image pseudo-tokens].
class Tokenizer {
 public:
  Tokenizer(ChatMarkup markup, std::size_t image_vocab);
  virtual ~Tokenizer() = default;

  std::vector<int> encode(std::string_view text) const;

  int special_id(Special s) const;
  int image_token_id(std::size_t slot) const;
  bool is_image_token(int id) const;

  // Deterministic pseudo-visual prefix for an image.
  std::vector<int> image_prefix(std::string_view image_id, std::size_t count) const;

  // True if any markup token occurs in `text`.
  bool contains_reserved(std::string_view text) const;

  std::size_t image_vocab() const { return image_vocab_; }
  std::size_t vocab_size() const;
  const ChatMarkup& markup() const { return markup_; }

  virtual std::size_t plain_vocab_size() const = 0;

 protected:
  virtual void encode_plain(std::string_view text, std::vector<int>& out) const = 0;

 private:
  ChatMarkup markup_;
  std::size_t image_vocab_;
};

// One id per byte. The reference tokenizer for exact layout checks.
class ByteTokenizer final : public Tokenizer {
 public:
  explicit ByteTokenizer(ChatMarkup markup = {}, std::size_t image_vocab = 32)
      : Tokenizer(std::move(markup), image_vocab) {}

  std::size_t plain_vocab_size() const override { return 256; }

 protected:
  void encode_plain(std::string_view text, std::vector<int>& out) const override;
};

// Closed word vocabulary split on whitespace. Unknown words are a
// TokenizerFailure.
class WordTokenizer final : public Tokenizer {
 public:
  WordTokenizer(std::vector<std::string> words, ChatMarkup markup = {},
                std::size_t image_vocab = 32);

  std::size_t plain_vocab_size() const override { return words_.size(); }
  const std::vector<std::string>& words() const { return words_; }

 protected:
  void encode_plain(std::string_view text, std::vector<int>& out) const override;

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, int> index_;
};

}  // namespace muco
