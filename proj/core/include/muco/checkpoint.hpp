// Copyright 2026 The muco Authors
// SPDX-License-Identifier: Apache-2.0
//
// Tensor file format shared by encoder checkpoints and embedding dumps:
//
//   MUCO-TENSORS 1 key=value ... segments=name:count,name:count\n
//   <little-endian IEEE-754 float64 values, segments back to back>
//
// Keys, values and segment names may not contain whitespace, '=', ':' or ','.

#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "muco/encoder.hpp"
#include "muco/types.hpp"

namespace muco {

struct TensorFile {
  std::vector<std::pair<std::string, std::string>> attributes;
  std::vector<std::pair<std::string, std::vector<double>>> segments;

  const std::string& attribute(const std::string& key) const;
  const std::vector<double>& segment(const std::string& name) const;
};

void write_tensor_file(const std::filesystem::path& path, const TensorFile& file);
TensorFile read_tensor_file(const std::filesystem::path& path);

// Encoder checkpoint: config in the header, one segment per parameter block.
void save_encoder(const std::filesystem::path& path, const EncoderState& state,
                  const std::vector<std::pair<std::string, std::string>>& extra = {});
EncoderState load_encoder(const std::filesystem::path& path,
                          std::vector<std::pair<std::string, std::string>>* extra = nullptr);

// Query/target embedding dump with parallel label arrays
// (image_index, turn_index, role, variant) stored as doubles.
void write_embedding_dump(const std::filesystem::path& path, const EmbeddingMatrix& queries,
                          const EmbeddingMatrix& targets);
std::pair<EmbeddingMatrix, EmbeddingMatrix> read_embedding_dump(
    const std::filesystem::path& path);

}  // namespace muco
