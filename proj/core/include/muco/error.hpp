// Copyright 2026 The muco Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace muco {

enum class ErrorCode {
  kInvalidConfig,
  kIo,
  // core
  kDuplicateImageId,
  kEmptyPairs,
  kEmptyText,
  // template
  kTokenizerFailure,
  kReservedTokenInText,
  // encoder
  kSequenceTooLong,
  kTokenOutOfVocab,
  // contrast
  kMissingAlignedPositive,
  kUnpairedAugmentation,
  kLabelMismatch,
  kNonUnitEmbedding,
  // costmodel
  kDegenerateFit,
  // datagen
  kResolutionFiltered,
  kProviderUnavailable,
  kEmptyResponse,
  kParseFailure,
  kCardinalityViolation,
  kDuplicateQuery,
  kSchemaViolation,
  // harness
  kEmptyEvalSet,
};

std::string_view error_code_name(ErrorCode code);

// All recoverable failures in the library are reported as this type.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace muco
