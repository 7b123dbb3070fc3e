// Copyright 2026 The muco Authors
// SPDX-License-Identifier: Apache-2.0

#include "muco/synthetic.hpp"

#include <array>
#include <string_view>

#include "muco/error.hpp"
#include "muco/rng.hpp"

namespace muco {
namespace {

constexpr std::array<std::string_view, 8> kFunctionWords = {
    "the", "a", "of", "what", "is", "this", "show", "me"};

std::string image_word(std::size_t image, std::size_t slot) {
  return "w" + std::to_string(image) + "_" + std::to_string(slot);
}

std::string phrase(Rng& rng, std::size_t image, std::size_t words_per_image,
                   std::size_t content_words, bool question) {
  std::string out(kFunctionWords[rng.uniform_index(kFunctionWords.size())]);
  for (std::size_t w = 0; w < content_words; ++w) {
    out += ' ';
    out += image_word(image, rng.uniform_index(words_per_image));
  }
  if (question) {
    out += ' ';
    out += kFunctionWords[rng.uniform_index(kFunctionWords.size())];
  }
  return out;
}

}  // namespace

SyntheticCorpus make_separable_corpus(const SyntheticSpec& spec) {
  if (spec.images == 0 || spec.pairs_per_image == 0 || spec.words_per_image == 0 ||
      spec.query_words == 0 || spec.target_words == 0) {
    throw Error(ErrorCode::kInvalidConfig, "synthetic corpus sizes must be >= 1");
  }
  SyntheticCorpus corpus;
  for (auto w : kFunctionWords) corpus.vocabulary.emplace_back(w);
  for (std::size_t i = 0; i < spec.images; ++i) {
    for (std::size_t s = 0; s < spec.words_per_image; ++s) {
      corpus.vocabulary.push_back(image_word(i, s));
    }
  }

  Rng rng(mix_seed(spec.seed, 0x5eed));
  for (std::size_t i = 0; i < spec.images; ++i) {
    MultiTurnSample sample;
    sample.image_id = "img" + std::to_string(i);
    sample.image_tokens = spec.image_tokens;
    for (std::size_t j = 0; j < spec.pairs_per_image; ++j) {
      sample.pairs.push_back({phrase(rng, i, spec.words_per_image, spec.query_words, true),
                              phrase(rng, i, spec.words_per_image, spec.target_words, false),
                              TaskTag::kGeneric});
    }
    for (std::size_t h = 0; h < spec.heldout_per_image; ++h) {
      corpus.heldout.push_back({sample.image_id, spec.image_tokens,
                                phrase(rng, i, spec.words_per_image, spec.query_words, true),
                                phrase(rng, i, spec.words_per_image, spec.target_words, false)});
    }
    corpus.train.push_back(std::move(sample));
  }
  return corpus;
}

}  // namespace muco
