// Copyright 2026 The muco Authors
// SPDX-License-Identifier: Apache-2.0
//
// Domain types shared across the engine. Everything here is immutable once
// constructed and validated.

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "muco/matrix.hpp"

namespace muco {

enum class TaskTag { kCls, kRet, kGlobalVqa, kLocalVqa, kCreativeVqa, kGeneric };

std::string_view task_tag_name(TaskTag tag);
std::optional<TaskTag> parse_task_tag(std::string_view name);

struct TurnPair {
  std::string query_text;
  std::string target_text;
  TaskTag task_tag = TaskTag::kGeneric;

  friend bool operator==(const TurnPair&, const TurnPair&) = default;
};

// One image context with k ordered query/target pairs.
struct MultiTurnSample {
  std::string image_id;
  std::size_t image_tokens = 0;  // length of the pseudo-visual prefix
  std::vector<TurnPair> pairs;

  friend bool operator==(const MultiTurnSample&, const MultiTurnSample&) = default;
};

enum class Role { kQuery, kTarget };
enum class Variant { kOriginal, kAugmented };

struct RowLabel {
  std::size_t image_index = 0;
  std::size_t turn_index = 0;
  Role role = Role::kQuery;
  Variant variant = Variant::kOriginal;

  friend bool operator==(const RowLabel&, const RowLabel&) = default;
};

std::string to_string(const RowLabel& label);

// Rows of unit Euclidean norm, one per label. Construction rejects rows whose
// norm is outside [1 - tolerance, 1 + tolerance].
class EmbeddingMatrix {
 public:
  static constexpr double kNormTolerance = 1e-9;

  EmbeddingMatrix(std::vector<RowLabel> labels, std::size_t dim,
                  std::vector<double> values);

  // Normalizes each row before validating. Zero rows are rejected.
  static EmbeddingMatrix normalized(std::vector<RowLabel> labels,
                                    std::size_t dim, std::vector<double> values);

  std::size_t rows() const { return labels_.size(); }
  std::size_t dim() const { return values_.cols(); }
  const std::vector<RowLabel>& labels() const { return labels_; }
  const Matrix& values() const { return values_; }
  std::span<const double> row(std::size_t r) const { return values_.row(r); }

 private:
  std::vector<RowLabel> labels_;
  Matrix values_;
};

struct LossConfig {
  double temperature = 0.02;
  bool mask_same_image = true;
  bool mask_counterpart = true;

  void validate() const;
};

// Checks every sample invariant and batch-level image_id uniqueness. Returns
// the batch unchanged on success.
std::vector<MultiTurnSample> validate_batch(std::vector<MultiTurnSample> samples);

// Trims ASCII whitespace from both ends.
std::string_view trim(std::string_view text);

}  // namespace muco
