// Copyright 2026 The muco Authors
// SPDX-License-Identifier: Apache-2.0

#include "muco/contrast.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "muco/error.hpp"

namespace muco {
namespace {

void require(bool ok, ErrorCode code, const std::string& what) {
  if (!ok) throw Error(code, what);
}

void require_original(const std::vector<RowLabel>& labels) {
  for (const auto& l : labels) {
    require(l.variant == Variant::kOriginal, ErrorCode::kLabelMismatch,
            "augmented row " + to_string(l) + " in a pretraining batch");
  }
}

}  // namespace

MaskedLogitSpec::MaskedLogitSpec(std::vector<RowLabel> queries, std::vector<RowLabel> targets,
                                 std::vector<LossTerm> terms, std::vector<EntryKind> kinds)
    : queries_(std::move(queries)),
      targets_(std::move(targets)),
      terms_(std::move(terms)),
      kinds_(std::move(kinds)) {
  require(kinds_.size() == terms_.size() * targets_.size(), ErrorCode::kLabelMismatch,
          "kind matrix does not match term and target counts");
  for (std::size_t r = 0; r < terms_.size(); ++r) {
    require(terms_[r].query < queries_.size() && terms_[r].positive < targets_.size(),
            ErrorCode::kLabelMismatch, "term index out of range");
    require(count(r, EntryKind::kPositive) == 1 &&
                kind(r, terms_[r].positive) == EntryKind::kPositive,
            ErrorCode::kLabelMismatch, "term row must hold exactly one positive");
  }
}

std::size_t MaskedLogitSpec::count(std::size_t term, EntryKind k) const {
  const auto begin = kinds_.begin() + static_cast<std::ptrdiff_t>(term * targets_.size());
  return static_cast<std::size_t>(
      std::count(begin, begin + static_cast<std::ptrdiff_t>(targets_.size()), k));
}

MaskedLogitSpec build_mask_pretrain(const std::vector<RowLabel>& queries,
                                    const std::vector<RowLabel>& targets,
                                    bool mask_same_image) {
  require_original(queries);
  require_original(targets);
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> column_of;
  for (std::size_t c = 0; c < targets.size(); ++c) {
    require(targets[c].role == Role::kTarget, ErrorCode::kLabelMismatch,
            "target list holds a query row");
    const bool fresh =
        column_of.emplace(std::make_pair(targets[c].image_index, targets[c].turn_index), c).second;
    require(fresh, ErrorCode::kLabelMismatch, "duplicate target " + to_string(targets[c]));
  }

  std::vector<LossTerm> terms;
  std::vector<EntryKind> kinds;
  kinds.reserve(queries.size() * targets.size());
  for (std::size_t r = 0; r < queries.size(); ++r) {
    const auto& q = queries[r];
    require(q.role == Role::kQuery, ErrorCode::kLabelMismatch, "query list holds a target row");
    const auto it = column_of.find({q.image_index, q.turn_index});
    require(it != column_of.end(), ErrorCode::kMissingAlignedPositive,
            "no target aligned with " + to_string(q));
    terms.push_back({r, it->second});
    for (std::size_t c = 0; c < targets.size(); ++c) {
      if (c == it->second) {
        kinds.push_back(EntryKind::kPositive);
      } else if (targets[c].image_index == q.image_index && mask_same_image) {
        kinds.push_back(EntryKind::kMasked);
      } else {
        kinds.push_back(EntryKind::kNegative);
      }
    }
  }
  return MaskedLogitSpec(queries, targets, std::move(terms), std::move(kinds));
}

MaskedLogitSpec build_mask_finetune(const std::vector<RowLabel>& queries,
                                    const std::vector<RowLabel>& targets,
                                    bool mask_counterpart) {
  // Per sample: target columns of each form.
  struct Forms {
    std::size_t original = SIZE_MAX;
    std::size_t augmented = SIZE_MAX;
  };
  std::map<std::size_t, Forms> target_forms;
  std::map<std::size_t, Forms> query_forms;
  auto record = [](std::map<std::size_t, Forms>& m, const RowLabel& l, std::size_t idx) {
    auto& f = m[l.image_index];
    auto& slot = l.variant == Variant::kOriginal ? f.original : f.augmented;
    require(slot == SIZE_MAX, ErrorCode::kUnpairedAugmentation,
            "duplicate form for sample " + std::to_string(l.image_index));
    slot = idx;
  };
  for (std::size_t c = 0; c < targets.size(); ++c) {
    require(targets[c].role == Role::kTarget, ErrorCode::kLabelMismatch,
            "target list holds a query row");
    record(target_forms, targets[c], c);
  }
  for (std::size_t r = 0; r < queries.size(); ++r) {
    require(queries[r].role == Role::kQuery, ErrorCode::kLabelMismatch,
            "query list holds a target row");
    record(query_forms, queries[r], r);
  }
  auto complete = [](const Forms& f) { return f.original != SIZE_MAX && f.augmented != SIZE_MAX; };
  for (const auto& [sample, f] : target_forms) {
    const auto q = query_forms.find(sample);
    require(complete(f) && q != query_forms.end() && complete(q->second),
            ErrorCode::kUnpairedAugmentation,
            "sample " + std::to_string(sample) + " lacks an original or augmented form");
  }
  require(query_forms.size() == target_forms.size(), ErrorCode::kUnpairedAugmentation,
          "query sample without targets");

  std::vector<LossTerm> terms;
  std::vector<EntryKind> kinds;
  for (std::size_t r = 0; r < queries.size(); ++r) {
    const auto& own = target_forms.at(queries[r].image_index);
    for (const auto positive : {own.original, own.augmented}) {
      const auto counterpart = positive == own.original ? own.augmented : own.original;
      terms.push_back({r, positive});
      for (std::size_t c = 0; c < targets.size(); ++c) {
        if (c == positive) {
          kinds.push_back(EntryKind::kPositive);
        } else if (c == counterpart && mask_counterpart) {
          kinds.push_back(EntryKind::kMasked);
        } else {
          kinds.push_back(EntryKind::kNegative);
        }
      }
    }
  }
  return MaskedLogitSpec(queries, targets, std::move(terms), std::move(kinds));
}

SoftmaxTerms masked_softmax_loss(const Matrix& logits, const MaskedLogitSpec& spec) {
  const auto nt = spec.targets().size();
  require(logits.rows() == spec.queries().size() && logits.cols() == nt,
          ErrorCode::kLabelMismatch, "logit matrix shape does not match the spec");
  SoftmaxTerms out;
  out.d_logits = Matrix(logits.rows(), nt);
  const auto& terms = spec.terms();
  if (terms.empty()) return out;
  const double inv_terms = 1.0 / static_cast<double>(terms.size());

  std::vector<double> prob(nt);
  for (std::size_t r = 0; r < terms.size(); ++r) {
    const auto row = logits.row(terms[r].query);
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < nt; ++c) {
      if (spec.kind(r, c) != EntryKind::kMasked) mx = std::max(mx, row[c]);
    }
    double sum = 0.0;
    for (std::size_t c = 0; c < nt; ++c) {
      prob[c] = spec.kind(r, c) == EntryKind::kMasked ? 0.0 : std::exp(row[c] - mx);
      sum += prob[c];
    }
    const double lse = mx + std::log(sum);
    const double term = lse - row[terms[r].positive];
    out.per_term.push_back(std::max(term, 0.0));
    auto drow = out.d_logits.row(terms[r].query);
    for (std::size_t c = 0; c < nt; ++c) {
      const double p = prob[c] / sum;
      drow[c] += (p - (c == terms[r].positive ? 1.0 : 0.0)) * inv_terms;
    }
  }
  for (double v : out.per_term) out.total += v;
  out.total *= inv_terms;
  return out;
}

LossResult contrastive_loss(const Matrix& queries, const Matrix& targets,
                            const MaskedLogitSpec& spec, double temperature) {
  require(temperature > 0.0, ErrorCode::kInvalidConfig, "temperature must be > 0");
  require(queries.cols() == targets.cols(), ErrorCode::kLabelMismatch,
          "query and target dims differ");
  const auto nq = queries.rows();
  const auto nt = targets.rows();
  const auto d = queries.cols();
  const double inv_tau = 1.0 / temperature;

  LossResult res;
  res.report.logits = Matrix(nq, nt);
  for (std::size_t i = 0; i < nq; ++i) {
    for (std::size_t c = 0; c < nt; ++c) {
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) s += queries(i, k) * targets(c, k);
      res.report.logits(i, c) = s * inv_tau;
    }
  }
  auto sm = masked_softmax_loss(res.report.logits, spec);
  res.report.total = sm.total;
  res.report.effective_negatives_per_query =
      spec.terms().empty() ? 0 : SIZE_MAX;
  for (std::size_t r = 0; r < spec.terms().size(); ++r) {
    res.report.per_term.emplace_back(spec.queries()[spec.terms()[r].query], sm.per_term[r]);
    res.report.effective_negatives_per_query =
        std::min(res.report.effective_negatives_per_query, spec.count(r, EntryKind::kNegative));
  }

  res.grad_queries = Matrix(nq, d);
  res.grad_targets = Matrix(nt, d);
  for (std::size_t i = 0; i < nq; ++i) {
    for (std::size_t c = 0; c < nt; ++c) {
      const double g = sm.d_logits(i, c) * inv_tau;
      if (g == 0.0) continue;
      for (std::size_t k = 0; k < d; ++k) {
        res.grad_queries(i, k) += g * targets(c, k);
        res.grad_targets(c, k) += g * queries(i, k);
      }
    }
  }
  return res;
}

LossResult muco_loss(const EmbeddingMatrix& queries, const EmbeddingMatrix& targets,
                     const MaskedLogitSpec& spec, const LossConfig& cfg) {
  cfg.validate();
  require(queries.labels() == spec.queries(), ErrorCode::kLabelMismatch,
          "query labels differ from the mask spec");
  require(targets.labels() == spec.targets(), ErrorCode::kLabelMismatch,
          "target labels differ from the mask spec");
  return contrastive_loss(queries.values(), targets.values(), spec, cfg.temperature);
}

LossResult naive_multipair_loss(const EmbeddingMatrix& queries,
                                const EmbeddingMatrix& targets, const LossConfig& cfg) {
  const auto spec = build_mask_pretrain(queries.labels(), targets.labels(), false);
  return muco_loss(queries, targets, spec, cfg);
}

LossResult single_turn_infonce(const EmbeddingMatrix& queries,
                               const EmbeddingMatrix& targets, const LossConfig& cfg) {
  std::map<std::size_t, int> q_count;
  std::map<std::size_t, int> t_count;
  for (const auto& l : queries.labels()) ++q_count[l.image_index];
  for (const auto& l : targets.labels()) ++t_count[l.image_index];
  for (const auto& [img, n] : q_count) {
    require(n == 1, ErrorCode::kLabelMismatch,
            "single-turn loss needs one query per sample; sample " + std::to_string(img));
  }
  for (const auto& [img, n] : t_count) {
    require(n == 1, ErrorCode::kLabelMismatch,
            "single-turn loss needs one target per sample; sample " + std::to_string(img));
  }
  const auto spec = build_mask_pretrain(queries.labels(), targets.labels(), true);
  return muco_loss(queries, targets, spec, cfg);
}

std::size_t effective_negatives(std::size_t batch_images, std::size_t turns) {
  require(batch_images >= 1 && turns >= 1, ErrorCode::kInvalidConfig,
          "batch_images and turns must be >= 1");
  return batch_images * turns - turns;
}

}  // namespace muco
