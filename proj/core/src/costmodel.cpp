// Copyright 2026 The muco Authors
// SPDX-License-Identifier: Apache-2.0

#include "muco/costmodel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "muco/error.hpp"
#include "muco/types.hpp"

namespace muco {

void CostConfig::validate() const {
  for (double v : {flops_per_image_token, flops_per_text_token, backward_multiplier,
                   image_tokens, query_text_tokens, target_text_tokens,
                   per_extra_pair_tokens}) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw Error(ErrorCode::kInvalidConfig, "cost coefficients must be > 0");
    }
  }
}

double CostConfig::base_forward_flops() const {
  return image_tokens * flops_per_image_token +
         (query_text_tokens + target_text_tokens) * flops_per_text_token;
}

CostConfig CostConfig::table5_fitted() { return fit_table5(table5_rows()).config; }

std::vector<ScalingRow> table5_rows() {
  return {{1, 1024, 17.5}, {1, 2048, 35.1}, {1, 4096, 70.2}, {1, 7168, 122.7},
          {1, 8192, 140.4}, {2, 1024, 17.6}, {4, 1024, 17.7}, {7, 1024, 18.0}};
}

double image_forward_flops(const CostConfig& cfg, double image_tokens) {
  return image_tokens * cfg.flops_per_image_token;
}

double text_forward_flops(const CostConfig& cfg, double text_tokens) {
  return text_tokens * cfg.flops_per_text_token;
}

double iteration_cost(const CostConfig& cfg, std::size_t batch, std::size_t turns) {
  cfg.validate();
  if (batch < 1 || turns < 1) {
    throw Error(ErrorCode::kInvalidConfig, "batch and turns must be >= 1");
  }
  const double extra =
      static_cast<double>(turns - 1) * cfg.per_extra_pair_tokens * cfg.flops_per_text_token;
  return static_cast<double>(batch) * cfg.backward_multiplier *
         (cfg.base_forward_flops() + extra);
}

double efficiency_ratio(const CostConfig& cfg, std::size_t batch, std::size_t turns) {
  return iteration_cost(cfg, batch, turns) / iteration_cost(cfg, batch, 1);
}

FitResult fit_table5(const std::vector<ScalingRow>& rows, const CostConfig& base) {
  base.validate();
  // Weighted normal equations, weight 1/y so residuals are relative.
  double s11 = 0.0, s12 = 0.0, s22 = 0.0, r1 = 0.0, r2 = 0.0;
  for (const auto& row : rows) {
    if (row.batch < 1 || row.turns < 1 || !(row.pflops > 0.0)) {
      throw Error(ErrorCode::kInvalidConfig, "scaling rows need batch, turns >= 1 and pflops > 0");
    }
    const double x1 = static_cast<double>(row.batch) / row.pflops;
    const double x2 = static_cast<double>(row.batch * (row.turns - 1)) / row.pflops;
    s11 += x1 * x1;
    s12 += x1 * x2;
    s22 += x2 * x2;
    r1 += x1;
    r2 += x2;
  }
  const double det = s11 * s22 - s12 * s12;
  if (rows.size() < 2 || !(std::abs(det) > 1e-12 * std::max(1.0, s11 * s22))) {
    throw Error(ErrorCode::kDegenerateFit,
                "need at least two independent rows (varying batch and turns)");
  }
  FitResult fit;
  fit.per_sample_pflops = (r1 * s22 - r2 * s12) / det;
  fit.per_extra_pair_pflops = (s11 * r2 - s12 * r1) / det;
  if (!(fit.per_sample_pflops > 0.0) || !(fit.per_extra_pair_pflops > 0.0)) {
    throw Error(ErrorCode::kDegenerateFit, "fitted costs are not positive");
  }

  fit.config = base;
  fit.config.backward_multiplier = fit.per_sample_pflops * 1e15 / base.base_forward_flops();
  fit.config.per_extra_pair_tokens = fit.per_extra_pair_pflops * 1e15 /
                                     (fit.config.backward_multiplier * base.flops_per_text_token);
  for (const auto& row : rows) {
    const double predicted = iteration_cost(fit.config, row.batch, row.turns) / 1e15;
    const double rel = (predicted - row.pflops) / row.pflops;
    fit.relative_residuals.push_back(rel);
    fit.max_relative_residual = std::max(fit.max_relative_residual, std::abs(rel));
  }
  return fit;
}

std::vector<ScalingRow> read_scaling_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::string line;
  std::vector<ScalingRow> rows;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = trim(line);
    if (t.empty()) continue;
    if (line_no == 1 && t.find("turns") != std::string_view::npos) continue;
    std::istringstream ss{std::string(t)};
    std::string a, b, c;
    if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',') || !std::getline(ss, c)) {
      throw Error(ErrorCode::kIo, path.string() + ":" + std::to_string(line_no) +
                                      ": expected turns,batch,pflops");
    }
    try {
      rows.push_back({std::stoul(a), std::stoul(b), std::stod(c)});
    } catch (const std::exception&) {
      throw Error(ErrorCode::kIo, path.string() + ":" + std::to_string(line_no) +
                                      ": malformed number");
    }
  }
  return rows;
}

}  // namespace muco
