// Copyright 2026 The muco Authors
// SPDX-License-Identifier: Apache-2.0

#include "doctest.h"
#include "muco/error.hpp"
#include "muco/kvconfig.hpp"
#include "muco/tokenizer.hpp"

using namespace muco;

TEST_SUITE("tokenizer") {
  TEST_CASE("byte tokenizer id layout") {
    ByteTokenizer tok({}, 8);
    CHECK(tok.vocab_size() == 256 + 7 + 8);
    CHECK(tok.special_id(Special::kUserOpen) == 256);
    CHECK(tok.special_id(Special::kImage) == 262);
    CHECK(tok.image_token_id(0) == 263);
    CHECK(tok.is_image_token(270));
    CHECK_FALSE(tok.is_image_token(262));
    CHECK(tok.encode("Ab") == std::vector<int>{65, 98});
  }

  TEST_CASE("markup strings map to their reserved ids anywhere in the text") {
    ByteTokenizer tok;
    const auto ids = tok.encode("x<|emb|>y<|user|>");
    CHECK(ids == std::vector<int>{'x', tok.special_id(Special::kEmb), 'y',
                                  tok.special_id(Special::kUserOpen)});
    CHECK(tok.contains_reserved("a <|mask|> b"));
    CHECK_FALSE(tok.contains_reserved("a <|mas b"));
  }

  TEST_CASE("longest markup match wins") {
    ChatMarkup m;
    m.user_open = "<u>";
    m.user_close = "<u>>";
    ByteTokenizer tok(m);
    CHECK(tok.encode("<u>>") == std::vector<int>{tok.special_id(Special::kUserClose)});
  }

  TEST_CASE("image prefix is deterministic per image id") {
    ByteTokenizer tok({}, 16);
    const auto a = tok.image_prefix("cat", 10);
    CHECK(a.size() == 10);
    CHECK(a == tok.image_prefix("cat", 10));
    CHECK(a != tok.image_prefix("dog", 10));
    for (int id : a) CHECK(tok.is_image_token(id));
  }

  TEST_CASE("markup must be non-empty and distinct") {
    ChatMarkup m;
    m.mask_token = m.emb_token;
    CHECK_THROWS_AS(m.validate(), Error);
    m = {};
    m.user_close = "";
    CHECK_THROWS_AS(m.validate(), Error);
  }

  TEST_CASE("markup loads from config") {
    const auto m = ChatMarkup::from_config(
        KeyValueConfig::parse("[markup]\nemb_token = \"[EMB]\"\n"));
    CHECK(m.emb_token == "[EMB]");
    CHECK(m.user_open == "<|user|>");
  }

  TEST_CASE("word tokenizer rejects unknown words") {
    WordTokenizer tok({"red", "cat"});
    CHECK(tok.encode("cat  red") == std::vector<int>{1, 0});
    CHECK(tok.encode("<|user|>red") ==
          std::vector<int>{tok.special_id(Special::kUserOpen), 0});
    try {
      tok.encode("blue");
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kTokenizerFailure);
    }
  }
}
