// Copyright 2026 The muco Authors
// SPDX-License-Identifier: Apache-2.0
//
// Two-stage synthesis of seven tagged query/target pairs per image:
// dense captioning, then a single pair-generation call on the caption.
// The retrieval pair's positive is always the dense caption itself.

#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "muco/error.hpp"
#include "muco/provider.hpp"
#include "muco/tokenizer.hpp"
#include "muco/types.hpp"

namespace muco {

inline constexpr std::size_t kMinResolution = 512;
inline constexpr std::size_t kPairsPerImage = 7;

struct ImageRecord {
  std::string image_id;
  std::size_t width = 0;
  std::size_t height = 0;
  std::optional<std::string> dense_caption;
};

struct SynthRecord {
  std::string image_id;
  std::string dense_caption;
  std::vector<TurnPair> pairs;

  friend bool operator==(const SynthRecord&, const SynthRecord&) = default;
};

// Required count per tag, indexed by TaskTag (cls, ret, global, local, creative).
inline constexpr std::array<std::size_t, 5> kTagQuota = {1, 1, 2, 2, 1};

bool passes_resolution_filter(const ImageRecord& record);

// Dense caption via the provider, with retries. Rejects records below the
// resolution threshold before any call.
std::string caption(const ImageRecord& record, ChatProvider& provider,
                    const ProviderConfig& cfg);

// Parses labelled blocks
//
//   TASK: <cls|ret|global_vqa|local_vqa|creative_vqa>
//   QUERY: <text>
//   POSITIVE: <text>        (optional for ret; replaced by the caption)
//
// Blank lines are ignored and keys are case-insensitive. Anything else is a
// ParseFailure; a wrong pair or tag count is a CardinalityViolation.
std::vector<TurnPair> parse_pair_blocks(std::string_view text, std::string_view caption);

SynthRecord synth_pairs(std::string_view image_id, std::string_view caption,
                        ChatProvider& provider, const ProviderConfig& cfg);

// Throws SchemaViolation describing the first broken invariant.
void validate_synth_record(const SynthRecord& record);

std::string to_jsonl(const SynthRecord& record);
SynthRecord parse_synth_record(std::string_view line);
std::vector<ImageRecord> read_image_records(const std::filesystem::path& path);
std::string to_jsonl(const ImageRecord& record);

MultiTurnSample to_sample(const SynthRecord& record, std::size_t image_tokens);

struct PipelineOptions {
  std::filesystem::path output;
  std::size_t concurrency = 1;
};

struct PipelineStats {
  std::size_t written = 0;
  std::size_t skipped = 0;   // already present in the output
  std::size_t rejected = 0;  // filtered or failed; see `rejections`
  std::vector<std::string> rejections;
};

// Captions and synthesizes every record not already in `opts.output`,
// appending results in input order. Captions are persisted next to the output
// (`<output>.captions.jsonl`) so a rerun never re-captions an image.
PipelineStats run_synthesis(const std::vector<ImageRecord>& records, ChatProvider& provider,
                            const ProviderConfig& cfg, const PipelineOptions& opts);

class SchemaError : public Error {
 public:
  SchemaError(std::size_t line, const std::string& message)
      : Error(ErrorCode::kSchemaViolation, "line " + std::to_string(line) + ": " + message),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

struct LengthStats {
  std::size_t count = 0;
  std::size_t min = 0;
  std::size_t max = 0;
  double mean = 0.0;
  std::map<std::size_t, std::size_t> histogram;  // bucket start (width 8) -> count
};

struct CorpusReport {
  std::size_t records = 0;
  std::size_t pairs = 0;
  std::map<TaskTag, std::size_t> tag_counts;
  std::map<std::size_t, std::size_t> pairs_per_image;
  LengthStats query_tokens;
  LengthStats target_tokens;
};

// Reads a SynthRecord JSONL file and checks every record. Throws SchemaError
// carrying the 1-based line of the first violation.
CorpusReport validate_corpus(const std::filesystem::path& path, const Tokenizer& tokenizer);

}  // namespace muco
