// Copyright 2026 The muco Authors
// SPDX-License-Identifier: Apache-2.0
//
// Small encoder setups and gradient probes shared by unit and acceptance
// tests.

#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "muco/contrast.hpp"
#include "muco/encoder.hpp"
#include "muco/harness.hpp"
#include "muco/template.hpp"
#include "muco/tokenizer.hpp"
#include "oracles.hpp"

namespace muco::fixtures {

// 267-token vocabulary (bytes, markup, 4 image slots).
inline ByteTokenizer small_tokenizer() { return ByteTokenizer({}, 4); }

inline EncoderConfig small_encoder(std::uint64_t seed) {
  EncoderConfig cfg;
  cfg.vocab_size = small_tokenizer().vocab_size();
  cfg.dim = 8;
  cfg.heads = 2;
  cfg.layers = 2;
  cfg.max_seq = 64;
  cfg.seed = seed;
  return cfg;
}

inline std::vector<MultiTurnSample> small_batch(std::size_t images, std::size_t turns,
                                                std::uint64_t seed) {
  static const char* kWords[] = {"red", "cat", "sky", "dog", "sun", "car", "map", "cup"};
  std::mt19937_64 gen(seed);
  std::vector<MultiTurnSample> batch;
  for (std::size_t i = 0; i < images; ++i) {
    MultiTurnSample s{"im" + std::to_string(i), 2, {}};
    for (std::size_t j = 0; j < turns; ++j) {
      s.pairs.push_back({std::string(kWords[gen() % 8]) + " " + kWords[gen() % 8],
                         std::string(kWords[gen() % 8]), TaskTag::kGeneric});
    }
    batch.push_back(std::move(s));
  }
  return batch;
}

struct GradReport {
  double max_rel = 0.0;       // max |a - n| / max |n|
  double elementwise = 0.0;   // max |a - n| / max(|a|, |n|, floor)
  double norm_rel = 0.0;      // |a - n|_2 / |n|_2
  std::size_t checked = 0;
};

inline GradReport compare(const std::vector<double>& analytic, const std::vector<double>& numeric,
                          double floor) {
  GradReport r;
  double worst_diff = 0.0, scale = 0.0, diff = 0.0, norm = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double d = std::abs(analytic[i] - numeric[i]);
    worst_diff = std::max(worst_diff, d);
    scale = std::max(scale, std::abs(numeric[i]));
    r.elementwise = std::max(r.elementwise, oracle::relative_error(analytic[i], numeric[i], floor));
    diff += d * d;
    norm += numeric[i] * numeric[i];
  }
  r.max_rel = scale > 0.0 ? worst_diff / scale : worst_diff;
  r.norm_rel = norm > 0.0 ? std::sqrt(diff / norm) : std::sqrt(diff);
  r.checked = analytic.size();
  return r;
}

// Loss-level check: gradient of the masked loss with respect to raw query and
// target rows against central differences.
inline GradReport loss_gradcheck(std::size_t images, std::size_t turns, std::size_t dim,
                                 double tau, std::uint64_t seed, double step = 1e-6) {
  std::mt19937_64 gen(seed);
  std::vector<RowLabel> ql, tl;
  for (std::size_t i = 0; i < images; ++i) {
    for (std::size_t j = 0; j < turns; ++j) {
      ql.push_back({i, j, Role::kQuery, Variant::kOriginal});
      tl.push_back({i, j, Role::kTarget, Variant::kOriginal});
    }
  }
  auto q = oracle::random_unit_rows(ql.size(), dim, gen);
  auto t = oracle::random_unit_rows(tl.size(), dim, gen);
  const auto spec = build_mask_pretrain(ql, tl);
  const auto res = contrastive_loss(q, t, spec, tau);
  std::vector<double> analytic, numeric;
  auto total = [&] { return contrastive_loss(q, t, spec, tau).report.total; };
  for (auto* pair : {&q, &t}) {
    const auto& grad = pair == &q ? res.grad_queries : res.grad_targets;
    for (std::size_t i = 0; i < pair->size(); ++i) {
      analytic.push_back(grad.data()[i]);
      numeric.push_back(oracle::central_difference(total, pair->data()[i], step));
    }
  }
  return compare(analytic, numeric, 1e-8);
}

// Whole-model check through template, encoder, extraction and loss.
inline GradReport encoder_gradcheck(std::uint64_t seed, AttentionMode mode,
                                    double step = 1e-5) {
  const auto tok = small_tokenizer();
  auto state = EncoderState::init(small_encoder(seed));
  const auto batch = small_batch(2, 2, seed);
  TrainConfig cfg;
  cfg.attention_mode = mode;
  const auto out = batch_loss_and_grad(state, batch, cfg, tok, seed);
  std::vector<double> numeric(state.param_count());
  auto params = state.params();
  auto loss = [&] { return batch_loss_and_grad(state, batch, cfg, tok, seed).loss; };
  for (std::size_t i = 0; i < params.size(); ++i) {
    numeric[i] = oracle::central_difference(loss, params[i], step);
  }
  return compare(out.grads, numeric, 1e-6);
}

// Largest |d(turn-j term) / d(turn-i token input)| over i < j, image prefix
// excluded. The term is the loss of query row j against two images' targets.
inline double cross_turn_gradient(AttentionMode mode, std::uint64_t seed,
                                  std::size_t turns = 3) {
  const auto tok = small_tokenizer();
  const auto state = EncoderState::init(small_encoder(seed));
  const auto batch = small_batch(1, turns, seed);
  const auto [packed, unused] = pack_multiturn(batch[0], tok, mode);
  const auto acts = forward(state, packed);
  const auto queries = extract_embeddings(acts.hidden, packed, 0, Role::kQuery);

  std::mt19937_64 gen(seed ^ 0xabcdef);
  std::vector<RowLabel> tl;
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < turns; ++j) tl.push_back({i, j, Role::kTarget, Variant::kOriginal});
  }
  const auto targets = oracle::random_unit_rows(tl.size(), state.config().dim, gen);
  const auto full = build_mask_pretrain(queries.labels(), tl);

  double worst = 0.0;
  for (std::size_t j = 1; j < turns; ++j) {
    std::vector<EntryKind> kinds;
    for (std::size_t c = 0; c < tl.size(); ++c) kinds.push_back(full.kind(j, c));
    const MaskedLogitSpec only_j(queries.labels(), tl, {full.terms()[j]}, kinds);
    const auto res = contrastive_loss(queries.values(), targets, only_j, 0.02);
    const auto d_hidden = embedding_backward(acts.hidden, packed, res.grad_queries);
    const auto grads = backward(state, acts, d_hidden);
    for (std::size_t p = packed.image_prefix_len; p < packed.size(); ++p) {
      if (packed.token_turn[p] >= static_cast<int>(j)) continue;
      for (double v : grads.input.row(p)) worst = std::max(worst, std::abs(v));
    }
  }
  return worst;
}

}  // namespace muco::fixtures
