// Copyright 2026 The muco Authors
// SPDX-License-Identifier: Apache-2.0

#include "muco/harness.hpp"

#include <algorithm>
#include <cmath>

#include "muco/error.hpp"
#include "muco/kvconfig.hpp"
#include "muco/rng.hpp"

namespace muco {
namespace {

struct EncodedSequence {
  PackedSequence packed;
  EncoderActivations acts;
  std::size_t first_row = 0;  // first row in the query or target matrix
  Role role = Role::kQuery;
};

// Unit rows at the packed emb positions, relabelled.
EmbeddingMatrix embed_rows(const EncodedSequence& seq, std::vector<RowLabel> labels) {
  const auto raw = extract_embeddings(seq.acts.hidden, seq.packed);
  return EmbeddingMatrix(std::move(labels), raw.dim(), raw.values().data());
}

void append_rows(std::vector<RowLabel>& labels, std::vector<double>& values,
                 const EmbeddingMatrix& m) {
  labels.insert(labels.end(), m.labels().begin(), m.labels().end());
  values.insert(values.end(), m.values().data().begin(), m.values().data().end());
}

}  // namespace

std::string_view loss_variant_name(LossVariant v) {
  switch (v) {
    case LossVariant::kMuco: return "muco";
    case LossVariant::kNaive: return "naive";
    case LossVariant::kSingleTurn: return "single_turn";
    case LossVariant::kFinetuneAdapted: return "finetune_adapted";
  }
  return "muco";
}

LossVariant parse_loss_variant(std::string_view name) {
  for (auto v : {LossVariant::kMuco, LossVariant::kNaive, LossVariant::kSingleTurn,
                 LossVariant::kFinetuneAdapted}) {
    if (loss_variant_name(v) == name) return v;
  }
  throw Error(ErrorCode::kInvalidConfig, "unknown loss variant: " + std::string(name));
}

void TrainConfig::validate() const {
  if (steps < 1) throw Error(ErrorCode::kInvalidConfig, "steps must be >= 1");
  if (batch_images < 1) throw Error(ErrorCode::kInvalidConfig, "batch_images must be >= 1");
  if (turns_per_image < 1) throw Error(ErrorCode::kInvalidConfig, "turns_per_image must be >= 1");
  if (!(learning_rate > 0.0)) throw Error(ErrorCode::kInvalidConfig, "learning_rate must be > 0");
  loss.validate();
  prompts.validate();
}

TrainConfig TrainConfig::paper_preset() {
  TrainConfig c;
  c.learning_rate = 5e-5;
  c.optimizer = OptimizerKind::kAdam;
  return c;
}

TrainConfig TrainConfig::from_config(const KeyValueConfig& kv) {
  TrainConfig c = kv.get_string("train.preset", "toy") == "paper" ? paper_preset() : TrainConfig{};
  c.batch_images = static_cast<std::size_t>(kv.get_int("train.batch_images", static_cast<long long>(c.batch_images)));
  c.turns_per_image = static_cast<std::size_t>(kv.get_int("train.turns", static_cast<long long>(c.turns_per_image)));
  c.steps = static_cast<std::size_t>(kv.get_int("train.steps", static_cast<long long>(c.steps)));
  c.learning_rate = kv.get_double("train.learning_rate", c.learning_rate);
  if (auto o = kv.get("train.optimizer")) c.optimizer = parse_optimizer(*o);
  c.seed = static_cast<std::uint64_t>(kv.get_int("train.seed", static_cast<long long>(c.seed)));
  if (auto m = kv.get("train.attention_mode")) c.attention_mode = parse_attention_mode(*m);
  if (auto v = kv.get("train.loss_variant")) c.loss_variant = parse_loss_variant(*v);
  c.loss.temperature = kv.get_double("train.temperature", c.loss.temperature);
  c.loss.mask_same_image = kv.get_bool("train.mask_same_image", c.loss.mask_same_image);
  c.loss.mask_counterpart = kv.get_bool("train.mask_counterpart", c.loss.mask_counterpart);
  c.prompts = PromptConfig::from_config(kv);
  c.validate();
  return c;
}

double paper_learning_rate(std::size_t batch) {
  if (batch >= 7168) return 2e-4;
  if (batch >= 4096) return 1e-4;
  return 5e-5;
}

StepOutput batch_loss_and_grad(const EncoderState& state,
                               const std::vector<MultiTurnSample>& batch,
                               const TrainConfig& cfg, const Tokenizer& tokenizer,
                               std::uint64_t step_seed) {
  const auto& markup = tokenizer.markup();
  const bool finetune = cfg.loss_variant == LossVariant::kFinetuneAdapted;

  std::vector<EncodedSequence> seqs;
  std::vector<RowLabel> q_labels, t_labels;
  std::vector<double> q_values, t_values;

  auto encode = [&](PackedSequence packed, Role role) -> EncodedSequence& {
    EncodedSequence s;
    s.acts = forward(state, packed);
    s.packed = std::move(packed);
    s.role = role;
    s.first_row = role == Role::kQuery ? q_labels.size() : t_labels.size();
    seqs.push_back(std::move(s));
    return seqs.back();
  };

  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& sample = batch[b];
    if (finetune) {
      const auto& pair = sample.pairs.front();
      const auto texts = build_adapted_pair(pair.query_text, pair.target_text, cfg.prompts,
                                            markup, mix_seed(step_seed, 7000 + b));
      for (const Role role : {Role::kQuery, Role::kTarget}) {
        auto packed =
            role == Role::kQuery
                ? pack_dialogue(markup.image_placeholder + texts.query_augmented, tokenizer,
                                cfg.attention_mode, sample.image_id, sample.image_tokens)
                : pack_dialogue(texts.target_augmented, tokenizer, cfg.attention_mode);
        // Keep the initial and the final emb: original and augmented forms.
        packed.emb_positions = {packed.emb_positions.front(), packed.emb_positions.back()};
        packed.turn_of_position = {0, 1};
        auto& seq = encode(std::move(packed), role);
        const auto rows = embed_rows(seq, {{b, 0, role, Variant::kOriginal},
                                           {b, 0, role, Variant::kAugmented}});
        if (role == Role::kQuery) {
          append_rows(q_labels, q_values, rows);
        } else {
          append_rows(t_labels, t_values, rows);
        }
      }
      continue;
    }
    auto [q_packed, t_packed] = pack_multiturn(sample, tokenizer, cfg.attention_mode);
    auto& qs = encode(std::move(q_packed), Role::kQuery);
    append_rows(q_labels, q_values,
                extract_embeddings(qs.acts.hidden, qs.packed, b, Role::kQuery));
    auto& ts = encode(std::move(t_packed), Role::kTarget);
    append_rows(t_labels, t_values,
                extract_embeddings(ts.acts.hidden, ts.packed, b, Role::kTarget));
  }

  const auto dim = state.config().dim;
  const EmbeddingMatrix queries(std::move(q_labels), dim, std::move(q_values));
  const EmbeddingMatrix targets(std::move(t_labels), dim, std::move(t_values));

  LossResult loss;
  switch (cfg.loss_variant) {
    case LossVariant::kMuco:
      loss = muco_loss(queries, targets,
                       build_mask_pretrain(queries.labels(), targets.labels(),
                                           cfg.loss.mask_same_image),
                       cfg.loss);
      break;
    case LossVariant::kNaive:
      loss = naive_multipair_loss(queries, targets, cfg.loss);
      break;
    case LossVariant::kSingleTurn:
      loss = single_turn_infonce(queries, targets, cfg.loss);
      break;
    case LossVariant::kFinetuneAdapted:
      loss = muco_loss(queries, targets,
                       build_mask_finetune(queries.labels(), targets.labels(),
                                           cfg.loss.mask_counterpart),
                       cfg.loss);
      break;
  }

  StepOutput out;
  out.loss = loss.report.total;
  out.grads.assign(state.param_count(), 0.0);
  for (const auto& seq : seqs) {
    const auto& grad_rows = seq.role == Role::kQuery ? loss.grad_queries : loss.grad_targets;
    const auto n = seq.packed.emb_positions.size();
    Matrix d_emb(n, dim);
    for (std::size_t e = 0; e < n; ++e) {
      const auto src = grad_rows.row(seq.first_row + e);
      std::copy(src.begin(), src.end(), d_emb.row(e).begin());
    }
    const auto d_hidden = embedding_backward(seq.acts.hidden, seq.packed, d_emb);
    const auto g = backward(state, seq.acts, d_hidden);
    for (std::size_t i = 0; i < out.grads.size(); ++i) out.grads[i] += g.params[i];
  }
  return out;
}

TrainResult train(const std::vector<MultiTurnSample>& corpus, const TrainConfig& cfg,
                  const EncoderConfig& encoder, const Tokenizer& tokenizer) {
  cfg.validate();
  if (cfg.batch_images > corpus.size()) {
    throw Error(ErrorCode::kInvalidConfig, "batch_images exceeds corpus size");
  }
  if (tokenizer.vocab_size() > encoder.vocab_size) {
    throw Error(ErrorCode::kInvalidConfig, "encoder vocabulary smaller than the tokenizer's");
  }
  const std::size_t turns =
      cfg.loss_variant == LossVariant::kSingleTurn || cfg.loss_variant == LossVariant::kFinetuneAdapted
          ? 1
          : cfg.turns_per_image;
  for (const auto& s : corpus) {
    if (s.pairs.size() < turns) {
      throw Error(ErrorCode::kInvalidConfig,
                  "sample '" + s.image_id + "' has fewer pairs than turns_per_image");
    }
  }

  TrainResult result{EncoderState::init(encoder), {}};
  Optimizer opt(cfg.optimizer, cfg.learning_rate, result.state.param_count());
  std::vector<std::size_t> order(corpus.size());
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    const auto step_seed = mix_seed(cfg.seed, step + 1);
    Rng rng(step_seed);
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::vector<MultiTurnSample> batch;
    for (std::size_t b = 0; b < cfg.batch_images; ++b) {
      const auto j = b + static_cast<std::size_t>(rng.uniform_index(order.size() - b));
      std::swap(order[b], order[j]);
      auto sample = shuffle_turns(corpus[order[b]], mix_seed(step_seed, 1000 + b));
      sample.pairs.resize(turns);
      batch.push_back(std::move(sample));
    }
    auto out = batch_loss_and_grad(result.state, batch, cfg, tokenizer, step_seed);
    result.losses.push_back(out.loss);
    opt.step(result.state.params(), out.grads);
  }
  return result;
}

EvalReport rank_embeddings(const Matrix& queries, const Matrix& targets,
                           const std::vector<std::size_t>& ks) {
  if (queries.rows() == 0 || targets.rows() == 0) {
    throw Error(ErrorCode::kEmptyEvalSet, "no queries or candidates");
  }
  if (queries.rows() > targets.rows() || queries.cols() != targets.cols()) {
    throw Error(ErrorCode::kLabelMismatch, "query i must have candidate i");
  }
  const auto nq = queries.rows();
  const auto nc = targets.rows();
  std::vector<std::size_t> cutoffs;
  for (auto k : ks) cutoffs.push_back(std::clamp<std::size_t>(k, 1, nc));
  cutoffs.push_back(nc);
  std::sort(cutoffs.begin(), cutoffs.end());
  cutoffs.erase(std::unique(cutoffs.begin(), cutoffs.end()), cutoffs.end());

  EvalReport report;
  report.candidates = nc;
  report.queries = nq;
  std::map<std::size_t, std::size_t> hits;
  std::vector<double> sims(nc);
  for (std::size_t i = 0; i < nq; ++i) {
    for (std::size_t c = 0; c < nc; ++c) {
      double s = 0.0;
      for (std::size_t k = 0; k < queries.cols(); ++k) s += queries(i, k) * targets(c, k);
      sims[c] = s;
    }
    std::size_t rank = 0;
    for (std::size_t c = 0; c < nc; ++c) {
      if (sims[c] > sims[i] || (sims[c] == sims[i] && c < i)) ++rank;
    }
    for (auto k : cutoffs) {
      if (rank < k) ++hits[k];
    }
  }
  for (auto k : cutoffs) {
    report.recall_at_k[k] = static_cast<double>(hits[k]) / static_cast<double>(nq);
  }
  report.precision_at_1 = report.recall_at_k.at(1);
  return report;
}

EvalReport evaluate(const EncoderState& state, const std::vector<EvalPair>& pairs,
                    const Tokenizer& tokenizer, AttentionMode mode,
                    const std::vector<std::size_t>& ks) {
  if (pairs.empty()) throw Error(ErrorCode::kEmptyEvalSet, "evaluation set is empty");
  const auto& markup = tokenizer.markup();
  const auto dim = state.config().dim;
  Matrix queries(pairs.size(), dim);
  Matrix targets(pairs.size(), dim);

  auto initial_embedding = [&](const PackedSequence& packed, std::span<double> out) {
    const auto acts = forward(state, packed);
    auto first = packed;
    first.emb_positions.resize(1);
    first.turn_of_position.resize(1);
    const auto e = extract_embeddings(acts.hidden, first);
    std::copy(e.row(0).begin(), e.row(0).end(), out.begin());
  };

  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& p = pairs[i];
    if (tokenizer.contains_reserved(p.query) || tokenizer.contains_reserved(p.target)) {
      throw Error(ErrorCode::kReservedTokenInText, "evaluation text contains markup");
    }
    initial_embedding(pack_dialogue(render_turn(markup, p.query, markup.emb_token), tokenizer,
                                    mode, p.image_id, p.image_tokens),
                      queries.row(i));
    initial_embedding(
        pack_dialogue(render_turn(markup, p.target, markup.emb_token), tokenizer, mode),
        targets.row(i));
  }
  return rank_embeddings(queries, targets, ks);
}

ScalingReport compare_scaling(const SyntheticCorpus& corpus, const TrainConfig& base,
                              const EncoderConfig& encoder, const Tokenizer& tokenizer,
                              const CostConfig& cost) {
  base.validate();
  if (base.turns_per_image < 2) {
    throw Error(ErrorCode::kInvalidConfig, "compare_scaling needs turns_per_image >= 2");
  }
  const auto k = base.turns_per_image;
  const auto batch = base.batch_images;

  auto run = [&](std::size_t turns) {
    TrainConfig cfg = base;
    cfg.turns_per_image = turns;
    cfg.loss_variant = LossVariant::kMuco;
    auto trained = train(corpus.train, cfg, encoder, tokenizer);
    ScalingArm arm;
    arm.turns = turns;
    arm.batch = batch;
    arm.effective_batch = turns * batch;
    arm.pflops_per_iteration = iteration_cost(cost, batch, turns) / 1e15;
    arm.precision_at_1 = evaluate(trained.state, corpus.heldout, tokenizer, cfg.attention_mode)
                             .precision_at_1;
    arm.losses = std::move(trained.losses);
    return arm;
  };

  ScalingReport report;
  report.single_turn = run(1);
  report.multi_turn = run(k);
  report.batch_scaled.turns = 1;
  report.batch_scaled.batch = batch * k;
  report.batch_scaled.effective_batch = batch * k;
  report.batch_scaled.pflops_per_iteration = iteration_cost(cost, batch * k, 1) / 1e15;
  report.chance_rate = 1.0 / static_cast<double>(corpus.heldout.size());
  return report;
}

}  // namespace muco
