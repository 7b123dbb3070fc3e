// Copyright 2026 The muco Authors
// SPDX-License-Identifier: Apache-2.0

#include "muco/template.hpp"

#include <algorithm>
#include <cmath>

#include "muco/error.hpp"
#include "muco/kvconfig.hpp"
#include "muco/rng.hpp"

namespace muco {
namespace {

void append(std::vector<int>& dst, const std::vector<int>& src) {
  dst.insert(dst.end(), src.begin(), src.end());
}

void check_user_text(const Tokenizer& tokenizer, std::string_view text) {
  if (tokenizer.contains_reserved(text)) {
    throw Error(ErrorCode::kReservedTokenInText,
                "text contains a reserved markup token: " + std::string(text));
  }
}

void check_user_text(const ChatMarkup& markup, std::string_view text) {
  for (auto tok : markup.tokens()) {
    if (text.find(tok) != std::string_view::npos) {
      throw Error(ErrorCode::kReservedTokenInText,
                  "text contains reserved token " + std::string(tok));
    }
  }
}

std::vector<int> encode_checked(const Tokenizer& tokenizer, std::string_view text) {
  try {
    return tokenizer.encode(text);
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(ErrorCode::kTokenizerFailure, e.what());
  }
}

// Fills emb positions and per-token turns, user_open starting each turn.
void annotate(PackedSequence& seq, const Tokenizer& tokenizer) {
  const int user_open = tokenizer.special_id(Special::kUserOpen);
  const int emb = tokenizer.special_id(Special::kEmb);
  seq.token_turn.assign(seq.token_ids.size(), kPrefixTurn);
  seq.emb_positions.clear();
  seq.turn_of_position.clear();
  int turn = -1;
  for (std::size_t p = 0; p < seq.token_ids.size(); ++p) {
    if (p < seq.image_prefix_len) continue;
    if (seq.token_ids[p] == user_open) ++turn;
    const int t = std::max(turn, 0);
    seq.token_turn[p] = t;
    if (seq.token_ids[p] == emb) {
      seq.emb_positions.push_back(p);
      seq.turn_of_position.push_back(static_cast<std::size_t>(t));
    }
  }
}

std::vector<std::string_view> split_spaces(std::string_view text) {
  std::vector<std::string_view> fields;
  std::size_t pos = 0;
  while (true) {
    const auto sp = text.find(' ', pos);
    if (sp == std::string_view::npos) {
      fields.push_back(text.substr(pos));
      return fields;
    }
    fields.push_back(text.substr(pos, sp - pos));
    pos = sp + 1;
  }
}

}  // namespace

std::string_view attention_mode_name(AttentionMode mode) {
  return mode == AttentionMode::kCausal ? "causal" : "isolated_turns";
}

AttentionMode parse_attention_mode(std::string_view name) {
  if (name == "causal") return AttentionMode::kCausal;
  if (name == "isolated_turns") return AttentionMode::kIsolatedTurns;
  throw Error(ErrorCode::kInvalidConfig, "unknown attention mode: " + std::string(name));
}

void PackedSequence::validate(const Tokenizer& tokenizer) const {
  auto bad = [](const char* what) { throw Error(ErrorCode::kInvalidConfig, what); };
  if (image_prefix_len > token_ids.size()) bad("image prefix longer than sequence");
  if (token_turn.size() != token_ids.size()) bad("token_turn size mismatch");
  if (turn_of_position.size() != emb_positions.size()) bad("turn_of_position size mismatch");
  const int emb = tokenizer.special_id(Special::kEmb);
  for (std::size_t i = 0; i < emb_positions.size(); ++i) {
    if (i > 0 && emb_positions[i] <= emb_positions[i - 1]) bad("emb positions not increasing");
    if (emb_positions[i] >= token_ids.size()) bad("emb position out of range");
    if (token_ids[emb_positions[i]] != emb) bad("emb position does not hold the emb token");
  }
}

std::string render_turn(const ChatMarkup& markup, std::string_view user_text,
                        std::string_view assistant_text) {
  std::string out;
  out.reserve(user_text.size() + assistant_text.size() + 64);
  out += markup.user_open;
  out += user_text;
  out += markup.user_close;
  out += markup.assistant_open;
  out += assistant_text;
  out += markup.assistant_close;
  return out;
}

std::pair<PackedSequence, PackedSequence> pack_multiturn(const MultiTurnSample& sample,
                                                         const Tokenizer& tokenizer,
                                                         AttentionMode mode) {
  if (sample.pairs.empty()) {
    throw Error(ErrorCode::kEmptyPairs, "sample '" + sample.image_id + "' has no pairs");
  }
  const int user_open = tokenizer.special_id(Special::kUserOpen);
  const int user_close = tokenizer.special_id(Special::kUserClose);
  const int asst_open = tokenizer.special_id(Special::kAssistantOpen);
  const int asst_close = tokenizer.special_id(Special::kAssistantClose);
  const int emb = tokenizer.special_id(Special::kEmb);

  PackedSequence query;
  PackedSequence target;
  query.attention_mode = target.attention_mode = mode;

  query.token_ids.push_back(tokenizer.special_id(Special::kImage));
  append(query.token_ids, tokenizer.image_prefix(sample.image_id, sample.image_tokens));
  query.image_prefix_len = query.token_ids.size();

  auto emit_turn = [&](PackedSequence& seq, std::string_view text) {
    check_user_text(tokenizer, text);
    seq.token_ids.push_back(user_open);
    append(seq.token_ids, encode_checked(tokenizer, text));
    seq.token_ids.insert(seq.token_ids.end(), {user_close, asst_open, emb, asst_close});
  };
  for (const auto& pair : sample.pairs) {
    emit_turn(query, pair.query_text);
    emit_turn(target, pair.target_text);
  }
  annotate(query, tokenizer);
  annotate(target, tokenizer);
  return {std::move(query), std::move(target)};
}

PackedSequence pack_dialogue(std::string_view dialogue, const Tokenizer& tokenizer,
                             AttentionMode mode, std::string_view image_id,
                             std::size_t image_tokens) {
  PackedSequence seq;
  seq.attention_mode = mode;
  auto ids = encode_checked(tokenizer, dialogue);
  const int image = tokenizer.special_id(Special::kImage);
  const bool has_image = !ids.empty() && ids.front() == image;
  if (has_image || image_tokens > 0) {
    seq.token_ids.push_back(image);
    append(seq.token_ids, tokenizer.image_prefix(image_id, image_tokens));
    seq.image_prefix_len = seq.token_ids.size();
    seq.token_ids.insert(seq.token_ids.end(), ids.begin() + (has_image ? 1 : 0), ids.end());
  } else {
    seq.token_ids = std::move(ids);
  }
  annotate(seq, tokenizer);
  return seq;
}

MultiTurnSample shuffle_turns(MultiTurnSample sample, std::uint64_t seed) {
  Rng rng(seed);
  auto& pairs = sample.pairs;
  for (std::size_t i = pairs.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform_index(i));
    std::swap(pairs[i - 1], pairs[j]);
  }
  return sample;
}

std::vector<std::size_t> sample_mask_indices(std::size_t word_count, double ratio,
                                             std::uint64_t seed) {
  if (!(ratio >= 0.0 && ratio <= 1.0)) {
    throw Error(ErrorCode::kInvalidConfig, "mask ratio must lie in [0, 1]");
  }
  const auto count = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(word_count)));
  std::vector<std::size_t> order(word_count);
  for (std::size_t i = 0; i < word_count; ++i) order[i] = i;
  Rng rng(seed);
  for (std::size_t i = 0; i < count; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.uniform_index(word_count - i));
    std::swap(order[i], order[j]);
  }
  order.resize(count);
  return order;
}

std::string mask_words(std::string_view text, double ratio, std::uint64_t seed,
                       std::string_view mask_token) {
  auto fields = split_spaces(text);
  std::vector<std::size_t> word_fields;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (!fields[i].empty()) word_fields.push_back(i);
  }
  for (auto w : sample_mask_indices(word_fields.size(), ratio, seed)) {
    fields[word_fields[w]] = mask_token;
  }
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i > 0) out.push_back(' ');
    out += fields[i];
  }
  return out;
}

std::string_view template_variant_name(TemplateVariant v) {
  switch (v) {
    case TemplateVariant::kReconstruction: return "reconstruction";
    case TemplateVariant::kRephrasing: return "rephrasing";
    case TemplateVariant::kSelfReconstruction: return "self_reconstruction";
    case TemplateVariant::kNoGuidance: return "no_guidance";
  }
  return "reconstruction";
}

TemplateVariant parse_template_variant(std::string_view name) {
  for (auto v : {TemplateVariant::kReconstruction, TemplateVariant::kRephrasing,
                 TemplateVariant::kSelfReconstruction, TemplateVariant::kNoGuidance}) {
    if (template_variant_name(v) == name) return v;
  }
  throw Error(ErrorCode::kInvalidConfig, "unknown template variant: " + std::string(name));
}

void PromptConfig::validate() const {
  if (!(mask_ratio >= 0.0 && mask_ratio <= 1.0)) {
    throw Error(ErrorCode::kInvalidConfig, "mask_ratio must lie in [0, 1]");
  }
}

PromptConfig PromptConfig::from_config(const KeyValueConfig& cfg) {
  PromptConfig p;
  p.pi1 = cfg.get_string("prompt.pi1", p.pi1);
  p.pi2 = cfg.get_string("prompt.pi2", p.pi2);
  p.rephrase_request = cfg.get_string("prompt.rephrase_request", p.rephrase_request);
  p.plain_embed_request = cfg.get_string("prompt.plain_embed_request", p.plain_embed_request);
  p.mask_ratio = cfg.get_double("prompt.mask_ratio", p.mask_ratio);
  if (auto v = cfg.get("prompt.template_variant")) p.variant = parse_template_variant(*v);
  p.validate();
  return p;
}

AdaptedTexts build_adapted_pair(std::string_view query, std::string_view target,
                                const PromptConfig& cfg, const ChatMarkup& markup,
                                std::uint64_t seed) {
  cfg.validate();
  for (auto text : {query, target, std::string_view(cfg.pi1), std::string_view(cfg.pi2),
                    std::string_view(cfg.rephrase_request),
                    std::string_view(cfg.plain_embed_request)}) {
    check_user_text(markup, text);
  }

  AdaptedTexts out;
  out.query_original = render_turn(markup, query, markup.emb_token);
  out.target_original = render_turn(markup, target, markup.emb_token);

  // Side-specific streams so the two masked copies are independent.
  const auto query_side_seed = mix_seed(seed, 1);
  const auto target_side_seed = mix_seed(seed, 2);

  auto subsequent = [&](std::string_view masked) {
    const std::string_view request =
        cfg.variant == TemplateVariant::kNoGuidance ? cfg.plain_embed_request : cfg.pi2;
    return render_turn(markup, cfg.pi1, masked) +
           render_turn(markup, request, markup.emb_token);
  };

  switch (cfg.variant) {
    case TemplateVariant::kRephrasing:
      out.query_augmented =
          out.query_original + render_turn(markup, cfg.rephrase_request, markup.emb_token);
      out.target_augmented =
          out.target_original + render_turn(markup, cfg.rephrase_request, markup.emb_token);
      break;
    case TemplateVariant::kSelfReconstruction:
      out.query_augmented = out.query_original +
                            subsequent(mask_words(query, cfg.mask_ratio, query_side_seed,
                                                  markup.mask_token));
      out.target_augmented = out.target_original +
                             subsequent(mask_words(target, cfg.mask_ratio, target_side_seed,
                                                   markup.mask_token));
      break;
    case TemplateVariant::kReconstruction:
    case TemplateVariant::kNoGuidance:
      out.query_augmented = out.query_original +
                            subsequent(mask_words(target, cfg.mask_ratio, query_side_seed,
                                                  markup.mask_token));
      out.target_augmented = out.target_original +
                             subsequent(mask_words(query, cfg.mask_ratio, target_side_seed,
                                                   markup.mask_token));
      break;
  }
  return out;
}

}  // namespace muco
