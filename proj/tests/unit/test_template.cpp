// Copyright 2026 The muco Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <set>

#include "doctest.h"
#include "muco/error.hpp"
#include "muco/kvconfig.hpp"
#include "muco/rng.hpp"
#include "muco/template.hpp"
#include "oracles.hpp"

using namespace muco;

namespace {

MultiTurnSample sample(std::size_t k, std::size_t image_tokens = 3) {
  MultiTurnSample s{"img-7", image_tokens, {}};
  for (std::size_t j = 0; j < k; ++j) {
    s.pairs.push_back({"what is item " + std::to_string(j) + "?",
                       "it is item " + std::to_string(j), TaskTag::kGeneric});
  }
  return s;
}

}  // namespace

TEST_SUITE("template") {
  TEST_CASE("k turns give k emb positions on both sides") {
    ByteTokenizer tok;
    for (std::size_t k : {1u, 7u}) {
      const auto [q, t] = pack_multiturn(sample(k), tok, AttentionMode::kCausal);
      CHECK(q.emb_positions.size() == k);
      CHECK(t.emb_positions.size() == k);
      CHECK_NOTHROW(q.validate(tok));
      CHECK_NOTHROW(t.validate(tok));
      for (std::size_t j = 0; j < k; ++j) CHECK(q.turn_of_position[j] == j);
    }
  }

  TEST_CASE("packed layout equals a hand assembled string") {
    ByteTokenizer tok;
    const auto s = sample(3);
    const auto [q, t] = pack_multiturn(s, tok, AttentionMode::kCausal);
    std::string q_text, t_text;
    for (const auto& p : s.pairs) {
      q_text += "<|user|>" + p.query_text + "<|end_user|><|assistant|><|emb|><|end_assistant|>";
      t_text += "<|user|>" + p.target_text + "<|end_user|><|assistant|><|emb|><|end_assistant|>";
    }
    std::vector<int> expected = {tok.special_id(Special::kImage)};
    const auto prefix = tok.image_prefix(s.image_id, s.image_tokens);
    expected.insert(expected.end(), prefix.begin(), prefix.end());
    const auto body = tok.encode(q_text);
    expected.insert(expected.end(), body.begin(), body.end());
    CHECK(q.token_ids == expected);
    CHECK(t.token_ids == tok.encode(t_text));
    CHECK(q.image_prefix_len == 1 + s.image_tokens);
    CHECK(t.image_prefix_len == 0);
  }

  TEST_CASE("the image appears once on the query side and never on the target side") {
    ByteTokenizer tok;
    const int image = tok.special_id(Special::kImage);
    for (std::size_t k : {1u, 4u, 7u}) {
      const auto [q, t] = pack_multiturn(sample(k), tok, AttentionMode::kCausal);
      CHECK(std::count(q.token_ids.begin(), q.token_ids.end(), image) == 1);
      CHECK(q.token_ids.front() == image);
      CHECK(std::count(t.token_ids.begin(), t.token_ids.end(), image) == 0);
    }
  }

  TEST_CASE("turn j's emb follows all of turn j and precedes turn j+1") {
    ByteTokenizer tok;
    const auto [q, t] = pack_multiturn(sample(5), tok, AttentionMode::kIsolatedTurns);
    for (const auto* seq : {&q, &t}) {
      for (std::size_t j = 0; j < 5; ++j) {
        const auto e = seq->emb_positions[j];
        for (std::size_t p = 0; p < seq->size(); ++p) {
          if (seq->token_turn[p] == static_cast<int>(j) && p > e) {
            CHECK(seq->token_ids[p] == tok.special_id(Special::kAssistantClose));
          }
          if (seq->token_turn[p] > static_cast<int>(j)) CHECK(p > e);
          if (seq->token_turn[p] >= 0 && seq->token_turn[p] < static_cast<int>(j)) {
            CHECK(p < e);
          }
        }
      }
    }
  }

  TEST_CASE("reserved tokens in user text are rejected") {
    ByteTokenizer tok;
    auto s = sample(2);
    s.pairs[1].query_text = "sneaky <|emb|>";
    try {
      pack_multiturn(s, tok, AttentionMode::kCausal);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kReservedTokenInText);
    }
  }

  TEST_CASE("tokenizer failures surface as TokenizerFailure") {
    WordTokenizer tok({"what", "is"});
    try {
      pack_multiturn(sample(1), tok, AttentionMode::kCausal);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kTokenizerFailure);
    }
  }

  TEST_CASE("shuffle_turns is a seeded permutation") {
    const auto s = sample(7);
    CHECK(shuffle_turns(sample(1), 3) == sample(1));
    CHECK(shuffle_turns(s, 11) == shuffle_turns(s, 11));
    const auto shuffled = shuffle_turns(s, 11);
    std::multiset<std::string> a, b;
    for (const auto& p : s.pairs) a.insert(p.query_text + "|" + p.target_text);
    for (const auto& p : shuffled.pairs) b.insert(p.query_text + "|" + p.target_text);
    CHECK(a == b);
    bool differs = false;
    for (std::uint64_t seed = 0; seed < 100 && !differs; ++seed) {
      differs = shuffle_turns(s, seed).pairs != shuffle_turns(s, seed + 1000).pairs;
    }
    CHECK(differs);
  }

  TEST_CASE("mask_words edge cases") {
    CHECK(mask_words("a b c", 0.0, 1, "<|mask|>") == "a b c");
    CHECK(mask_words("a b c", 1.0, 1, "<|mask|>") == "<|mask|> <|mask|> <|mask|>");
    CHECK(mask_words("", 0.5, 1, "<|mask|>") == "");
    CHECK(mask_words("a  b", 1.0, 1, "M") == "M  M");
    CHECK_THROWS_AS(mask_words("a", 1.5, 1, "M"), Error);
  }

  TEST_CASE("mask_words matches the independent sampler") {
    const std::string text = "one two three four five six";
    const auto masked = mask_words(text, 0.5, 42, "<|mask|>");
    CHECK(masked == oracle::mask_words(text, 0.5, 42, "<|mask|>"));
    const auto words = oracle::split_words(masked);
    CHECK(std::count(words.begin(), words.end(), "<|mask|>") == 3);
    const auto chosen = oracle::mask_positions(6, 0.5, 42);
    const auto original = oracle::split_words(text);
    for (std::size_t i = 0; i < 6; ++i) {
      CHECK(words[i] == (chosen.count(i) ? "<|mask|>" : original[i]));
    }
  }

  TEST_CASE("mask_words masks floor(ratio * W) words across lengths and seeds") {
    for (std::size_t w = 0; w < 30; ++w) {
      std::string text;
      for (std::size_t i = 0; i < w; ++i) text += (i ? " w" : "w") + std::to_string(i);
      for (std::uint64_t seed = 0; seed < 10; ++seed) {
        for (double ratio : {0.1, 0.5, 0.75}) {
          const auto out = mask_words(text, ratio, seed, "#");
          CHECK(out == oracle::mask_words(text, ratio, seed, "#"));
          const auto fields = oracle::split_words(out);
          const auto n = static_cast<std::size_t>(std::count(fields.begin(), fields.end(), "#"));
          CHECK(n == static_cast<std::size_t>(std::floor(ratio * static_cast<double>(w))));
        }
      }
    }
  }

  TEST_CASE("adapted pair under reconstruction") {
    const ChatMarkup m;
    PromptConfig cfg;
    const auto out = build_adapted_pair("find the red car", "a red car parked by a tree", cfg,
                                        m, 9);
    const auto masked_p = mask_words("a red car parked by a tree", 0.5,
                                     muco::mix_seed(9, 1), m.mask_token);
    const auto masked_q = mask_words("find the red car", 0.5, muco::mix_seed(9, 2),
                                     m.mask_token);
    CHECK(out.query_original == render_turn(m, "find the red car", m.emb_token));
    CHECK(out.query_augmented == out.query_original + render_turn(m, cfg.pi1, masked_p) +
                                     render_turn(m, cfg.pi2, m.emb_token));
    CHECK(out.target_augmented == out.target_original + render_turn(m, cfg.pi1, masked_q) +
                                      render_turn(m, cfg.pi2, m.emb_token));
    CHECK(build_adapted_pair("find the red car", "a red car parked by a tree", cfg, m, 9) ==
          out);
  }

  TEST_CASE("adapted pair variants") {
    const ChatMarkup m;
    PromptConfig cfg;
    cfg.mask_ratio = 0.0;
    auto out = build_adapted_pair("q text", "p text", cfg, m, 1);
    CHECK(out.query_augmented.find(render_turn(m, cfg.pi1, "p text")) != std::string::npos);

    cfg.variant = TemplateVariant::kRephrasing;
    out = build_adapted_pair("q text", "p text", cfg, m, 1);
    CHECK(out.query_augmented ==
          out.query_original +
              render_turn(m, "Please rephrase your last response in embedding space",
                          m.emb_token));

    cfg.variant = TemplateVariant::kSelfReconstruction;
    out = build_adapted_pair("q text", "p text", cfg, m, 1);
    CHECK(out.query_augmented.find(render_turn(m, cfg.pi1, "q text")) != std::string::npos);
    CHECK(out.target_augmented.find(render_turn(m, cfg.pi1, "p text")) != std::string::npos);

    cfg.variant = TemplateVariant::kNoGuidance;
    out = build_adapted_pair("q text", "p text", cfg, m, 1);
    CHECK(out.query_augmented.find(cfg.pi2) == std::string::npos);
    CHECK(out.query_augmented.find(render_turn(m, cfg.plain_embed_request, m.emb_token)) !=
          std::string::npos);
  }

  TEST_CASE("adapted sides keep both emb tokens") {
    ByteTokenizer tok;
    for (auto v : {TemplateVariant::kReconstruction, TemplateVariant::kRephrasing,
                   TemplateVariant::kSelfReconstruction, TemplateVariant::kNoGuidance}) {
      PromptConfig cfg;
      cfg.variant = v;
      const auto out = build_adapted_pair("q one two", "p one two", cfg, tok.markup(), 4);
      const auto q = pack_dialogue(out.query_augmented, tok, AttentionMode::kCausal);
      CHECK(q.emb_positions.size() == 2);
      CHECK(q.emb_positions.back() == q.size() - 2);
    }
  }

  TEST_CASE("adapted pair rejects reserved tokens and bad ratios") {
    PromptConfig cfg;
    CHECK_THROWS_AS(build_adapted_pair("a <|mask|>", "b", cfg, {}, 1), Error);
    cfg.mask_ratio = -0.1;
    CHECK_THROWS_AS(build_adapted_pair("a", "b", cfg, {}, 1), Error);
  }

  TEST_CASE("prompt config from key-value file") {
    const auto cfg = PromptConfig::from_config(KeyValueConfig::parse(
        "[prompt]\nmask_ratio = 0.3\ntemplate_variant = \"rephrasing\"\npi1 = \"describe\"\n"));
    CHECK(cfg.mask_ratio == 0.3);
    CHECK(cfg.variant == TemplateVariant::kRephrasing);
    CHECK(cfg.pi1 == "describe");
    CHECK_THROWS_AS(parse_template_variant("other"), Error);
  }

  TEST_CASE("pack_dialogue adds the image prefix on request") {
    ByteTokenizer tok;
    const auto seq = pack_dialogue(render_turn(tok.markup(), "hi", "<|emb|>"), tok,
                                   AttentionMode::kCausal, "x", 2);
    CHECK(seq.image_prefix_len == 3);
    CHECK(seq.token_ids[0] == tok.special_id(Special::kImage));
    CHECK(seq.emb_positions.size() == 1);
  }
}
