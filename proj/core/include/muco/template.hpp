// Copyright 2026 The muco Authors
// SPDX-License-Identifier: Apache-2.0
//
// Dialogue layout for multi-turn contrastive training.
//
// Query side (one image, k turns):
//
//   <image> [pseudo-visual tokens]
//   <user> q_1 </user> <assistant> <emb> </assistant>
//   ...
//   <user> q_k </user> <assistant> <emb> </assistant>
//
// Target side: the same turn structure over p_1..p_k with no image. The j-th
// <emb> on either side sees only turns 1..j, so a single causal pass yields the
// embeddings of all cumulative prefixes at once.

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "muco/tokenizer.hpp"
#include "muco/types.hpp"

namespace muco {

class KeyValueConfig;

enum class AttentionMode { kCausal, kIsolatedTurns };

std::string_view attention_mode_name(AttentionMode mode);
AttentionMode parse_attention_mode(std::string_view name);

// Sentinel turn index for image-prefix tokens.
inline constexpr int kPrefixTurn = -1;

struct PackedSequence {
  std::vector<int> token_ids;
  std::vector<std::size_t> emb_positions;     // strictly increasing
  std::vector<std::size_t> turn_of_position;  // turn index of each emb position
  std::vector<int> token_turn;                // per token; kPrefixTurn for the image prefix
  AttentionMode attention_mode = AttentionMode::kCausal;
  std::size_t image_prefix_len = 0;

  std::size_t size() const { return token_ids.size(); }

  // Throws kInvalidConfig if any structural invariant is broken.
  void validate(const Tokenizer& tokenizer) const;
};

std::pair<PackedSequence, PackedSequence> pack_multiturn(const MultiTurnSample& sample,
                                                         const Tokenizer& tokenizer,
                                                         AttentionMode mode);

// Packs an already rendered dialogue string. If `image_tokens` > 0 or the text
// starts with the image placeholder, the image prefix for `image_id` is emitted
// first. Turns are delimited by user_open tokens.
PackedSequence pack_dialogue(std::string_view dialogue, const Tokenizer& tokenizer,
                             AttentionMode mode, std::string_view image_id = {},
                             std::size_t image_tokens = 0);

// Renders one turn: <user> text </user> <assistant> reply </assistant>.
std::string render_turn(const ChatMarkup& markup, std::string_view user_text,
                        std::string_view assistant_text);

// Seeded uniform permutation of the sample's pairs.
MultiTurnSample shuffle_turns(MultiTurnSample sample, std::uint64_t seed);

// Indices (into the word list) that mask_words replaces, in sampling order.
std::vector<std::size_t> sample_mask_indices(std::size_t word_count, double ratio,
                                             std::uint64_t seed);

// Replaces floor(ratio * words) distinct space-delimited words with
// `mask_token`. Empty fields from repeated spaces are kept and never masked.
std::string mask_words(std::string_view text, double ratio, std::uint64_t seed,
                       std::string_view mask_token);

enum class TemplateVariant { kReconstruction, kRephrasing, kSelfReconstruction, kNoGuidance };

std::string_view template_variant_name(TemplateVariant v);
TemplateVariant parse_template_variant(std::string_view name);

struct PromptConfig {
  std::string pi1 = "Please rewrite your last response in human-readable language";
  std::string pi2 =
      "Reconstruct the previous response, acknowledge my query, and seamlessly integrate "
      "the answer";
  std::string rephrase_request = "Please rephrase your last response in embedding space";
  std::string plain_embed_request = "Please embed the conversation";
  double mask_ratio = 0.5;
  TemplateVariant variant = TemplateVariant::kReconstruction;

  void validate() const;

  // Reads `prompt.*` keys.
  static PromptConfig from_config(const KeyValueConfig& cfg);
};

// Both forms of both sides of a single pair, rendered as dialogue text.
struct AdaptedTexts {
  std::string query_original;
  std::string query_augmented;
  std::string target_original;
  std::string target_augmented;

  friend bool operator==(const AdaptedTexts&, const AdaptedTexts&) = default;
};

// Builds q' = (q, pi1, masked p, pi2) and p' = (p, pi1, masked q, pi2), or the
// configured variant thereof. Any image content must already be captioned.
AdaptedTexts build_adapted_pair(std::string_view query, std::string_view target,
                                const PromptConfig& cfg, const ChatMarkup& markup,
                                std::uint64_t seed);

}  // namespace muco
