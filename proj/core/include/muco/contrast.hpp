// Copyright 2026 The muco Authors
// SPDX-License-Identifier: Apache-2.0
//
// Logit masks and contrastive losses over labelled embedding rows.
//
// A loss is a list of terms. Each term pairs one query row with one positive
// target column; every other column is either a negative (kept in the softmax
// denominator) or masked (its logit is treated as -inf). The total loss is the
// mean over terms of
//
//   -log( exp(s_pos / tau) / sum_{c in {pos} U negatives} exp(s_c / tau) )
//
// with s the dot product of unit rows.

#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "muco/matrix.hpp"
#include "muco/types.hpp"

namespace muco {

enum class EntryKind : std::uint8_t { kPositive, kNegative, kMasked };

struct LossTerm {
  std::size_t query = 0;     // row in the query matrix
  std::size_t positive = 0;  // column in the target matrix
};

class MaskedLogitSpec {
 public:
  // Checks that every term row has exactly one positive at terms[r].positive.
  MaskedLogitSpec(std::vector<RowLabel> queries, std::vector<RowLabel> targets,
                  std::vector<LossTerm> terms, std::vector<EntryKind> kinds);

  const std::vector<RowLabel>& queries() const { return queries_; }
  const std::vector<RowLabel>& targets() const { return targets_; }
  const std::vector<LossTerm>& terms() const { return terms_; }

  EntryKind kind(std::size_t term, std::size_t column) const {
    return kinds_[term * targets_.size() + column];
  }
  std::size_t count(std::size_t term, EntryKind k) const;

 private:
  std::vector<RowLabel> queries_;
  std::vector<RowLabel> targets_;
  std::vector<LossTerm> terms_;
  std::vector<EntryKind> kinds_;  // terms x targets
};

// Multi-turn pretraining mask. Query (i, j) is positive with target (i, j);
// targets (i, l != j) are masked (negatives when mask_same_image is false);
// targets of other images are negatives.
MaskedLogitSpec build_mask_pretrain(const std::vector<RowLabel>& queries,
                                    const std::vector<RowLabel>& targets,
                                    bool mask_same_image = true);

// Single-pair adaptation mask. Each sample contributes query rows {q, q'} and
// target columns {p, p'}; every query row yields one term per own target form.
// Within a term the other form of the positive is masked (a negative when
// mask_counterpart is false); all columns of other samples are negatives.
MaskedLogitSpec build_mask_finetune(const std::vector<RowLabel>& queries,
                                    const std::vector<RowLabel>& targets,
                                    bool mask_counterpart = true);

struct LossReport {
  double total = 0.0;
  std::vector<std::pair<RowLabel, double>> per_term;
  std::size_t effective_negatives_per_query = 0;  // minimum over terms
  Matrix logits;                                  // similarity / tau, before masking
};

struct LossResult {
  LossReport report;
  Matrix grad_queries;  // d total / d query rows
  Matrix grad_targets;  // d total / d target rows
};

struct SoftmaxTerms {
  std::vector<double> per_term;
  double total = 0.0;
  Matrix d_logits;  // d total / d logits, (queries x targets)
};

// Masked softmax cross-entropy given precomputed logits (queries x targets).
// Masked entries never contribute, whatever their value.
SoftmaxTerms masked_softmax_loss(const Matrix& logits, const MaskedLogitSpec& spec);

// Loss over arbitrary rows (no norm check); the gradient is exact for the
// dot-product similarity used here. Gradient checks perturb through this.
LossResult contrastive_loss(const Matrix& queries, const Matrix& targets,
                            const MaskedLogitSpec& spec, double temperature);

// Validated entry points. Row labels must equal the spec's labels.
LossResult muco_loss(const EmbeddingMatrix& queries, const EmbeddingMatrix& targets,
                     const MaskedLogitSpec& spec, const LossConfig& cfg);

// Multi-pair loss with no same-image masking: every non-positive target is a
// negative.
LossResult naive_multipair_loss(const EmbeddingMatrix& queries,
                                const EmbeddingMatrix& targets, const LossConfig& cfg);

// Standard InfoNCE with one query and one target row per sample.
LossResult single_turn_infonce(const EmbeddingMatrix& queries,
                               const EmbeddingMatrix& targets, const LossConfig& cfg);

// batch_images * turns - turns.
std::size_t effective_negatives(std::size_t batch_images, std::size_t turns);

}  // namespace muco
