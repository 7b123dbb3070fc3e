// Copyright 2026 The muco Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include <random>
#include <string>
#include <vector>

#include "muco/contrast.hpp"
#include "muco/costmodel.hpp"
#include "muco/encoder.hpp"
#include "muco/template.hpp"
#include "muco/tokenizer.hpp"

namespace {

using namespace muco;

std::vector<RowLabel> grid(std::size_t images, std::size_t turns, Role role) {
  std::vector<RowLabel> out;
  for (std::size_t i = 0; i < images; ++i) {
    for (std::size_t j = 0; j < turns; ++j) out.push_back({i, j, role, Variant::kOriginal});
  }
  return out;
}

EmbeddingMatrix random_rows(std::vector<RowLabel> labels, std::size_t dim, std::mt19937_64& gen) {
  std::normal_distribution<double> normal;
  std::vector<double> v(labels.size() * dim);
  for (auto& x : v) x = normal(gen);
  return EmbeddingMatrix::normalized(std::move(labels), dim, std::move(v));
}

MultiTurnSample sample(std::size_t turns) {
  MultiTurnSample s{"bench", 4, {}};
  for (std::size_t j = 0; j < turns; ++j) {
    s.pairs.push_back({"what is shown in region " + std::to_string(j),
                       "a short description of region " + std::to_string(j), TaskTag::kGeneric});
  }
  return s;
}

void BM_MucoLoss(benchmark::State& state) {
  const auto images = static_cast<std::size_t>(state.range(0));
  const auto turns = static_cast<std::size_t>(state.range(1));
  std::mt19937_64 gen(1);
  const auto q = random_rows(grid(images, turns, Role::kQuery), 64, gen);
  const auto t = random_rows(grid(images, turns, Role::kTarget), 64, gen);
  const auto spec = build_mask_pretrain(q.labels(), t.labels());
  const LossConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(muco_loss(q, t, spec, cfg).report.total);
  state.SetItemsProcessed(state.iterations() * static_cast<long>(images * turns));
}
BENCHMARK(BM_MucoLoss)->Args({32, 1})->Args({32, 7})->Args({128, 7});

void BM_BuildMaskPretrain(benchmark::State& state) {
  const auto images = static_cast<std::size_t>(state.range(0));
  const auto ql = grid(images, 7, Role::kQuery), tl = grid(images, 7, Role::kTarget);
  for (auto _ : state) benchmark::DoNotOptimize(build_mask_pretrain(ql, tl).terms().size());
}
BENCHMARK(BM_BuildMaskPretrain)->Arg(32)->Arg(128);

void BM_EncoderForward(benchmark::State& state) {
  const ByteTokenizer tok;
  EncoderConfig cfg;
  cfg.vocab_size = tok.vocab_size();
  cfg.max_seq = 512;
  const auto enc = EncoderState::init(cfg);
  const auto packed = pack_multiturn(sample(static_cast<std::size_t>(state.range(0))), tok,
                                     AttentionMode::kCausal).first;
  for (auto _ : state) benchmark::DoNotOptimize(forward(enc, packed).hidden.size());
  state.counters["tokens"] = static_cast<double>(packed.size());
}
BENCHMARK(BM_EncoderForward)->Arg(1)->Arg(4)->Arg(7);

void BM_EncoderForwardBackward(benchmark::State& state) {
  const ByteTokenizer tok;
  EncoderConfig cfg;
  cfg.vocab_size = tok.vocab_size();
  cfg.max_seq = 512;
  const auto enc = EncoderState::init(cfg);
  const auto packed = pack_multiturn(sample(static_cast<std::size_t>(state.range(0))), tok,
                                     AttentionMode::kIsolatedTurns).first;
  for (auto _ : state) {
    const auto acts = forward(enc, packed);
    Matrix d_hidden(acts.hidden.rows(), acts.hidden.cols(), 1e-3);
    benchmark::DoNotOptimize(backward(enc, acts, d_hidden).params.data());
  }
}
BENCHMARK(BM_EncoderForwardBackward)->Arg(1)->Arg(7);

void BM_MaskWords(benchmark::State& state) {
  std::string text;
  for (long i = 0; i < state.range(0); ++i) text += (i ? " word" : "word") + std::to_string(i);
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(mask_words(text, 0.5, seed++, "<|mask|>"));
}
BENCHMARK(BM_MaskWords)->Arg(16)->Arg(256);

void BM_PackMultiturn(benchmark::State& state) {
  const ByteTokenizer tok;
  const auto s = sample(7);
  for (auto _ : state) {
    benchmark::DoNotOptimize(pack_multiturn(s, tok, AttentionMode::kCausal).first.size());
  }
}
BENCHMARK(BM_PackMultiturn);

void BM_IterationCost(benchmark::State& state) {
  const auto cfg = CostConfig::table5_fitted();
  std::size_t turns = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(iteration_cost(cfg, 1024, turns));
    turns = turns % 7 + 1;
  }
}
BENCHMARK(BM_IterationCost);

}  // namespace

BENCHMARK_MAIN();
