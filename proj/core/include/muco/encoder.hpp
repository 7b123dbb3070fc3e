// Copyright 2026 The muco Authors
// SPDX-License-Identifier: Apache-2.0
//
// Minimal pre-norm transformer encoder in double precision with exact
// reverse-mode gradients.
//
//   x_0 = tok_emb[id] + pos_emb[p]
//   per layer: x += Wo * Attn(LN1(x));  x += W2 * gelu(W1 * LN2(x))
//   hidden = LN_final(x)
//
// Attention masking follows PackedSequence::attention_mode: causal, or
// isolated turns where a token sees the image prefix plus earlier tokens of its
// own turn only.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "muco/matrix.hpp"
#include "muco/template.hpp"
#include "muco/types.hpp"

namespace muco {

struct EncoderConfig {
  std::size_t vocab_size = 300;
  std::size_t dim = 32;
  std::size_t heads = 4;
  std::size_t layers = 2;
  std::size_t max_seq = 128;
  std::uint64_t seed = 0;

  std::size_t ffn_dim() const { return 4 * dim; }
  void validate() const;

  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

struct Segment {
  std::string name;
  std::size_t offset = 0;
  std::size_t size = 0;
};

// Named segments of the flat parameter vector, in storage order.
std::vector<Segment> parameter_layout(const EncoderConfig& cfg);

class EncoderState {
 public:
  // Seeded: 0.02 * N(0, 1) for weight matrices and embeddings, zero biases,
  // unit layer-norm gains.
  static EncoderState init(const EncoderConfig& cfg);

  // Same layout, every value zero.
  static EncoderState zeros(const EncoderConfig& cfg);

  const EncoderConfig& config() const { return config_; }
  const std::vector<Segment>& segments() const { return segments_; }
  std::size_t param_count() const { return params_.size(); }

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }

  const Segment& find(std::string_view name) const;
  std::span<double> segment(std::string_view name);
  std::span<const double> segment(std::string_view name) const;

 private:
  EncoderState(EncoderConfig cfg, std::vector<Segment> segments, std::vector<double> params)
      : config_(cfg), segments_(std::move(segments)), params_(std::move(params)) {}

  friend EncoderState make_encoder_state(const EncoderConfig&, std::vector<double>);

  EncoderConfig config_;
  std::vector<Segment> segments_;
  std::vector<double> params_;
};

// Wraps an existing parameter vector (e.g. loaded from a checkpoint).
EncoderState make_encoder_state(const EncoderConfig& cfg, std::vector<double> params);

struct LayerActivations {
  Matrix input;  // residual stream entering the layer
  Matrix ln1_xhat;
  std::vector<double> ln1_rstd;
  Matrix ln1_out;
  Matrix qkv;
  std::vector<double> probs;  // heads x T x T, zero where masked
  Matrix attn_concat;
  Matrix mid;  // residual stream after attention
  Matrix ln2_xhat;
  std::vector<double> ln2_rstd;
  Matrix ln2_out;
  Matrix ffn_pre;
  Matrix ffn_act;
};

struct EncoderActivations {
  std::vector<int> token_ids;
  std::vector<int> token_turn;
  AttentionMode attention_mode = AttentionMode::kCausal;
  Matrix embedded;  // x_0
  std::vector<LayerActivations> layers;
  Matrix final_input;
  Matrix final_xhat;
  std::vector<double> final_rstd;
  Matrix hidden;  // (T, dim)

  bool attends(std::size_t from, std::size_t to) const;
};

EncoderActivations forward(const EncoderState& state, const PackedSequence& packed);

struct EncoderGradients {
  std::vector<double> params;  // same layout as EncoderState::params()
  Matrix input;                // d loss / d x_0, shape (T, dim)
};

EncoderGradients backward(const EncoderState& state, const EncoderActivations& acts,
                          const Matrix& d_hidden);

// Hidden states at the emb positions, l2-normalized, labelled by turn.
EmbeddingMatrix extract_embeddings(const Matrix& hidden, const PackedSequence& packed,
                                   std::size_t image_index = 0, Role role = Role::kQuery,
                                   Variant variant = Variant::kOriginal);

// Maps gradients with respect to the normalized embeddings (one row per emb
// position) back onto a (T, dim) hidden-state gradient.
Matrix embedding_backward(const Matrix& hidden, const PackedSequence& packed,
                          const Matrix& d_embeddings);

}  // namespace muco
