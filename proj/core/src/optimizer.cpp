// Copyright 2026 The muco Authors
// SPDX-License-Identifier: Apache-2.0

#include "muco/optimizer.hpp"

#include <cmath>
#include <string>

#include "muco/error.hpp"

namespace muco {

std::string_view optimizer_name(OptimizerKind kind) {
  return kind == OptimizerKind::kSgd ? "sgd" : "adam";
}

OptimizerKind parse_optimizer(std::string_view name) {
  if (name == "sgd") return OptimizerKind::kSgd;
  if (name == "adam") return OptimizerKind::kAdam;
  throw Error(ErrorCode::kInvalidConfig, "unknown optimizer: " + std::string(name));
}

Optimizer::Optimizer(OptimizerKind kind, double learning_rate, std::size_t size,
                     AdamParams adam)
    : kind_(kind), lr_(learning_rate), adam_(adam) {
  if (!(learning_rate > 0.0)) throw Error(ErrorCode::kInvalidConfig, "learning rate must be > 0");
  if (kind_ == OptimizerKind::kAdam) {
    m_.assign(size, 0.0);
    v_.assign(size, 0.0);
  }
}

void Optimizer::step(std::span<double> params, std::span<const double> grads) {
  if (params.size() != grads.size()) {
    throw Error(ErrorCode::kInvalidConfig, "parameter and gradient sizes differ");
  }
  ++t_;
  if (kind_ == OptimizerKind::kSgd) {
    for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr_ * grads[i];
    return;
  }
  if (m_.size() != params.size()) throw Error(ErrorCode::kInvalidConfig, "optimizer size mismatch");
  const double c1 = 1.0 - std::pow(adam_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(adam_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = adam_.beta1 * m_[i] + (1.0 - adam_.beta1) * grads[i];
    v_[i] = adam_.beta2 * v_[i] + (1.0 - adam_.beta2) * grads[i] * grads[i];
    params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + adam_.epsilon);
  }
}

}  // namespace muco
