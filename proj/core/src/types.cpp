// Copyright 2026 The muco Authors
// SPDX-License-Identifier: Apache-2.0

#include "muco/types.hpp"

#include <cmath>
#include <sstream>
#include <unordered_set>

#include "muco/error.hpp"

namespace muco {

std::string_view task_tag_name(TaskTag tag) {
  switch (tag) {
    case TaskTag::kCls: return "cls";
    case TaskTag::kRet: return "ret";
    case TaskTag::kGlobalVqa: return "global_vqa";
    case TaskTag::kLocalVqa: return "local_vqa";
    case TaskTag::kCreativeVqa: return "creative_vqa";
    case TaskTag::kGeneric: return "generic";
  }
  return "generic";
}

std::optional<TaskTag> parse_task_tag(std::string_view name) {
  for (TaskTag tag : {TaskTag::kCls, TaskTag::kRet, TaskTag::kGlobalVqa,
                      TaskTag::kLocalVqa, TaskTag::kCreativeVqa, TaskTag::kGeneric}) {
    if (task_tag_name(tag) == name) return tag;
  }
  return std::nullopt;
}

std::string to_string(const RowLabel& label) {
  std::ostringstream os;
  os << (label.role == Role::kQuery ? "q" : "t") << "(" << label.image_index << ","
     << label.turn_index << (label.variant == Variant::kAugmented ? ",aug" : "")
     << ")";
  return os.str();
}

std::string_view trim(std::string_view text) {
  constexpr std::string_view kSpace = " \t\r\n\f\v";
  const auto begin = text.find_first_not_of(kSpace);
  if (begin == std::string_view::npos) return {};
  const auto end = text.find_last_not_of(kSpace);
  return text.substr(begin, end - begin + 1);
}

EmbeddingMatrix::EmbeddingMatrix(std::vector<RowLabel> labels, std::size_t dim,
                                 std::vector<double> values)
    : labels_(std::move(labels)) {
  if (dim == 0) throw Error(ErrorCode::kInvalidConfig, "embedding dim must be >= 1");
  if (values.size() != labels_.size() * dim) {
    throw Error(ErrorCode::kLabelMismatch, "values size does not equal rows * dim");
  }
  values_ = Matrix(labels_.size(), dim, std::move(values));
  for (std::size_t r = 0; r < values_.rows(); ++r) {
    double sq = 0.0;
    for (double v : values_.row(r)) sq += v * v;
    const double norm = std::sqrt(sq);
    if (!(std::abs(norm - 1.0) <= kNormTolerance)) {
      std::ostringstream os;
      os << "row " << r << " has norm " << norm;
      throw Error(ErrorCode::kNonUnitEmbedding, os.str());
    }
  }
}

EmbeddingMatrix EmbeddingMatrix::normalized(std::vector<RowLabel> labels,
                                            std::size_t dim,
                                            std::vector<double> values) {
  if (dim == 0) throw Error(ErrorCode::kInvalidConfig, "embedding dim must be >= 1");
  if (values.size() != labels.size() * dim) {
    throw Error(ErrorCode::kLabelMismatch, "values size does not equal rows * dim");
  }
  for (std::size_t r = 0; r < labels.size(); ++r) {
    double sq = 0.0;
    for (std::size_t c = 0; c < dim; ++c) sq += values[r * dim + c] * values[r * dim + c];
    const double norm = std::sqrt(sq);
    if (norm == 0.0 || !std::isfinite(norm)) {
      throw Error(ErrorCode::kNonUnitEmbedding, "cannot normalize a zero row");
    }
    for (std::size_t c = 0; c < dim; ++c) values[r * dim + c] /= norm;
  }
  return EmbeddingMatrix(std::move(labels), dim, std::move(values));
}

void LossConfig::validate() const {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw Error(ErrorCode::kInvalidConfig, "temperature must be > 0");
  }
}

std::vector<MultiTurnSample> validate_batch(std::vector<MultiTurnSample> samples) {
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (!seen.insert(s.image_id).second) {
      throw Error(ErrorCode::kDuplicateImageId, "image_id '" + s.image_id + "' repeats");
    }
    if (s.pairs.empty()) {
      throw Error(ErrorCode::kEmptyPairs, "sample '" + s.image_id + "' has no pairs");
    }
    for (std::size_t j = 0; j < s.pairs.size(); ++j) {
      if (trim(s.pairs[j].query_text).empty() || trim(s.pairs[j].target_text).empty()) {
        throw Error(ErrorCode::kEmptyText, "sample '" + s.image_id + "' pair " +
                                               std::to_string(j) + " has empty text");
      }
    }
  }
  return samples;
}

}  // namespace muco
