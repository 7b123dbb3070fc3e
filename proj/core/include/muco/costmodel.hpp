// Copyright 2026 The muco Authors
// SPDX-License-Identifier: Apache-2.0
//
// Per-iteration FLOPs accounting, affine in token counts:
//
//   cost(batch, turns) = batch * m * [ n_img * c_img + (n_q + n_t) * c_txt
//                                      + (turns - 1) * n_extra * c_txt ]
//
// The image is encoded once per sample regardless of turns; each extra turn
// only adds text tokens.

#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

namespace muco {

struct CostConfig {
  double flops_per_image_token = 2.24e12 / 294.0;
  double flops_per_text_token = 0.12e12 / 25.0;
  double backward_multiplier = 1.0;  // folds backward and optimizer cost; fitted
  double image_tokens = 294.0;
  double query_text_tokens = 25.0;
  double target_text_tokens = 25.0;
  double per_extra_pair_tokens = 50.0;

  void validate() const;

  // Forward FLOPs of one sample's base (single-turn) input.
  double base_forward_flops() const;

  // Config fitted to the published batch-vs-turns table.
  static CostConfig table5_fitted();
};

struct ScalingRow {
  std::size_t turns = 1;
  std::size_t batch = 1;
  double pflops = 0.0;

  std::size_t effective_batch() const { return turns * batch; }
};

// The eight published (turns, batch, PFLOPs) rows.
std::vector<ScalingRow> table5_rows();

double image_forward_flops(const CostConfig& cfg, double image_tokens);
double text_forward_flops(const CostConfig& cfg, double text_tokens);

// Total FLOPs for one iteration.
double iteration_cost(const CostConfig& cfg, std::size_t batch, std::size_t turns);

// iteration_cost(batch, turns) / iteration_cost(batch, 1).
double efficiency_ratio(const CostConfig& cfg, std::size_t batch, std::size_t turns);

struct FitResult {
  CostConfig config;
  double per_sample_pflops = 0.0;     // fitted base cost per sample
  double per_extra_pair_pflops = 0.0;  // fitted cost per extra turn per sample
  std::vector<double> relative_residuals;
  double max_relative_residual = 0.0;
};

// Relative least squares of pflops ~ batch * A + batch * (turns - 1) * B.
// Token counts and per-token coefficients of `base` are kept; the fit sets
// backward_multiplier and per_extra_pair_tokens.
FitResult fit_table5(const std::vector<ScalingRow>& rows, const CostConfig& base = {});

// CSV with header turns,batch,pflops.
std::vector<ScalingRow> read_scaling_csv(const std::filesystem::path& path);

}  // namespace muco
