// Copyright 2026 The muco Authors
// SPDX-License-Identifier: Apache-2.0
//
// Seeded toy corpus where retrieval is learnable at desk scale: every image
// owns a disjoint slice of the word vocabulary, and all images share a small
// set of function words.

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "muco/types.hpp"

namespace muco {

struct SyntheticSpec {
  std::size_t images = 64;
  std::size_t pairs_per_image = 7;
  std::size_t heldout_per_image = 1;
  std::size_t words_per_image = 6;
  std::size_t query_words = 2;   // image-specific words per query
  std::size_t target_words = 3;  // image-specific words per target
  std::size_t image_tokens = 4;
  std::uint64_t seed = 0;
};

// A single-turn evaluation pair. The query carries the image prefix.
struct EvalPair {
  std::string image_id;
  std::size_t image_tokens = 0;
  std::string query;
  std::string target;
};

struct SyntheticCorpus {
  std::vector<MultiTurnSample> train;
  std::vector<EvalPair> heldout;
  std::vector<std::string> vocabulary;  // for WordTokenizer
};

SyntheticCorpus make_separable_corpus(const SyntheticSpec& spec);

}  // namespace muco
