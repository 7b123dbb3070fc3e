// Copyright 2026 The muco Authors
// SPDX-License-Identifier: Apache-2.0

#include "doctest.h"
#include "muco/error.hpp"
#include "muco/kvconfig.hpp"

using namespace muco;

TEST_SUITE("kvconfig") {
  TEST_CASE("parses sections, quoting and comments") {
    const auto cfg = KeyValueConfig::parse(
        "# top\n"
        "name = \"a \\\"b\\\"\\n c\"  # trailing\n"
        "ratio = 0.25\n"
        "\n"
        "[train]\n"
        "steps = 40\n"
        "enabled = true\n"
        "mode = causal\n");
    CHECK(cfg.get_string("name", "") == "a \"b\"\n c");
    CHECK(cfg.get_double("ratio", 0.0) == 0.25);
    CHECK(cfg.get_int("train.steps", 0) == 40);
    CHECK(cfg.get_bool("train.enabled", false));
    CHECK(cfg.get_string("train.mode", "") == "causal");
    CHECK(cfg.get_int("train.missing", 7) == 7);
    CHECK_FALSE(cfg.contains("steps"));
  }

  TEST_CASE("hash inside quotes is kept") {
    const auto cfg = KeyValueConfig::parse("x = \"a # b\"\n");
    CHECK(cfg.get_string("x", "") == "a # b");
  }

  TEST_CASE("malformed input is rejected") {
    CHECK_THROWS_AS(KeyValueConfig::parse("novalue\n"), Error);
    CHECK_THROWS_AS(KeyValueConfig::parse("x = \"open\n"), Error);
    const auto cfg = KeyValueConfig::parse("n = abc\nb = maybe\n");
    CHECK_THROWS_AS(cfg.get_int("n", 0), Error);
    CHECK_THROWS_AS(cfg.get_double("n", 0), Error);
    CHECK_THROWS_AS(cfg.get_bool("b", false), Error);
  }

  TEST_CASE("missing file is an io error") {
    try {
      KeyValueConfig::load("/nonexistent/muco.toml");
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kIo);
    }
  }
}
