// Copyright 2026 The muco Authors
// SPDX-License-Identifier: Apache-2.0
//
// Desk-scale training and evaluation loop over the template, encoder and
// contrast modules.

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string_view>
#include <vector>

#include "muco/contrast.hpp"
#include "muco/costmodel.hpp"
#include "muco/encoder.hpp"
#include "muco/optimizer.hpp"
#include "muco/synthetic.hpp"
#include "muco/template.hpp"
#include "muco/tokenizer.hpp"
#include "muco/types.hpp"

namespace muco {

class KeyValueConfig;

enum class LossVariant { kMuco, kNaive, kSingleTurn, kFinetuneAdapted };

std::string_view loss_variant_name(LossVariant v);
LossVariant parse_loss_variant(std::string_view name);

struct TrainConfig {
  std::size_t batch_images = 8;
  std::size_t turns_per_image = 7;
  std::size_t steps = 100;
  double learning_rate = 1e-3;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  std::uint64_t seed = 0;
  AttentionMode attention_mode = AttentionMode::kCausal;
  LossVariant loss_variant = LossVariant::kMuco;
  LossConfig loss;
  PromptConfig prompts;  // used by kFinetuneAdapted

  void validate() const;

  // Constant 5e-5 Adam, the large-model setting.
  static TrainConfig paper_preset();

  // Keys under `train.`; `train.preset = "paper"` starts from paper_preset().
  static TrainConfig from_config(const KeyValueConfig& cfg);
};

// Learning rate used by the batch-scaling runs, keyed by image batch size.
double paper_learning_rate(std::size_t batch);

struct TrainResult {
  EncoderState state;
  std::vector<double> losses;  // loss before each update
};

struct StepOutput {
  double loss = 0.0;
  std::vector<double> grads;  // summed over sequences in sample order
};

// Loss and parameter gradient for one batch of samples (already turn-shuffled
// and truncated). Exposed for testing; train() calls it once per step.
StepOutput batch_loss_and_grad(const EncoderState& state,
                               const std::vector<MultiTurnSample>& batch,
                               const TrainConfig& cfg, const Tokenizer& tokenizer,
                               std::uint64_t step_seed);

TrainResult train(const std::vector<MultiTurnSample>& corpus, const TrainConfig& cfg,
                  const EncoderConfig& encoder, const Tokenizer& tokenizer);

struct EvalReport {
  double precision_at_1 = 0.0;
  std::map<std::size_t, double> recall_at_k;
  std::size_t candidates = 0;
  std::size_t queries = 0;
};

// Query i's relevant candidate is target i. Candidates are ranked by cosine
// similarity; ties go to the lower index. Recall is reported for each k in
// `ks` (clamped to the candidate count) and for k = candidates.
EvalReport rank_embeddings(const Matrix& queries, const Matrix& targets,
                           const std::vector<std::size_t>& ks = {1, 5, 10});

// Encodes each query and target as a one-turn dialogue and ranks with the
// initial-turn embedding only.
EvalReport evaluate(const EncoderState& state, const std::vector<EvalPair>& pairs,
                    const Tokenizer& tokenizer, AttentionMode mode = AttentionMode::kCausal,
                    const std::vector<std::size_t>& ks = {1, 5, 10});

struct ScalingArm {
  std::size_t turns = 1;
  std::size_t batch = 1;
  std::size_t effective_batch = 1;
  double pflops_per_iteration = 0.0;  // from the cost model
  double precision_at_1 = 0.0;
  std::vector<double> losses;
};

struct ScalingReport {
  ScalingArm single_turn;
  ScalingArm multi_turn;
  ScalingArm batch_scaled;  // single turn at batch * turns; cost only, not trained
  double chance_rate = 0.0;
};

// Trains single-turn and multi-turn arms at the same image batch and step
// count, then evaluates both on the held-out pairs.
ScalingReport compare_scaling(const SyntheticCorpus& corpus, const TrainConfig& base,
                              const EncoderConfig& encoder, const Tokenizer& tokenizer,
                              const CostConfig& cost = CostConfig::table5_fitted());

}  // namespace muco
