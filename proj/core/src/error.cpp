// Copyright 2026 The muco Authors
// SPDX-License-Identifier: Apache-2.0

#include "muco/error.hpp"

namespace muco {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kIo: return "Io";
    case ErrorCode::kDuplicateImageId: return "DuplicateImageId";
    case ErrorCode::kEmptyPairs: return "EmptyPairs";
    case ErrorCode::kEmptyText: return "EmptyText";
    case ErrorCode::kTokenizerFailure: return "TokenizerFailure";
    case ErrorCode::kReservedTokenInText: return "ReservedTokenInText";
    case ErrorCode::kSequenceTooLong: return "SequenceTooLong";
    case ErrorCode::kTokenOutOfVocab: return "TokenOutOfVocab";
    case ErrorCode::kMissingAlignedPositive: return "MissingAlignedPositive";
    case ErrorCode::kUnpairedAugmentation: return "UnpairedAugmentation";
    case ErrorCode::kLabelMismatch: return "LabelMismatch";
    case ErrorCode::kNonUnitEmbedding: return "NonUnitEmbedding";
    case ErrorCode::kDegenerateFit: return "DegenerateFit";
    case ErrorCode::kResolutionFiltered: return "ResolutionFiltered";
    case ErrorCode::kProviderUnavailable: return "ProviderUnavailable";
    case ErrorCode::kEmptyResponse: return "EmptyResponse";
    case ErrorCode::kParseFailure: return "ParseFailure";
    case ErrorCode::kCardinalityViolation: return "CardinalityViolation";
    case ErrorCode::kDuplicateQuery: return "DuplicateQuery";
    case ErrorCode::kSchemaViolation: return "SchemaViolation";
    case ErrorCode::kEmptyEvalSet: return "EmptyEvalSet";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
      code_(code) {}

}  // namespace muco
