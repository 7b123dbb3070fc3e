// Copyright 2026 The muco Authors
// SPDX-License-Identifier: Apache-2.0
//
// muco command-line tool.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "muco/checkpoint.hpp"
#include "muco/contrast.hpp"
#include "muco/costmodel.hpp"
#include "muco/datagen.hpp"
#include "muco/error.hpp"
#include "muco/harness.hpp"
#include "muco/kvconfig.hpp"
#include "muco/provider.hpp"
#include "muco/synthetic.hpp"
#include "muco/template.hpp"
#include "muco/tokenizer.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace muco;

namespace {

KeyValueConfig load_config(const std::string& path) {
  return path.empty() ? KeyValueConfig{} : KeyValueConfig::load(path);
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (line.find_first_not_of(" \t\r") != std::string::npos) lines.push_back(line);
  }
  return lines;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << text;
}

std::vector<std::string> words_of(std::string_view text) {
  std::vector<std::string> out;
  std::istringstream in{std::string(text)};
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

// Tokenizer chosen by `tokenizer.kind` (byte or word). A word vocabulary comes
// from `tokenizer.vocab_file` when set, otherwise from `fallback_words`.
std::unique_ptr<Tokenizer> make_tokenizer(const KeyValueConfig& kv,
                                          const std::vector<std::string>& fallback_words) {
  const auto markup = ChatMarkup::from_config(kv);
  const auto image_vocab = static_cast<std::size_t>(kv.get_int("tokenizer.image_vocab", 32));
  const auto kind = kv.get_string("tokenizer.kind", "byte");
  if (kind == "byte") return std::make_unique<ByteTokenizer>(markup, image_vocab);
  if (kind != "word") throw Error(ErrorCode::kInvalidConfig, "unknown tokenizer.kind: " + kind);
  std::vector<std::string> words = fallback_words;
  if (auto file = kv.get("tokenizer.vocab_file")) words = read_lines(*file);
  return std::make_unique<WordTokenizer>(words, markup, image_vocab);
}

EncoderConfig encoder_config(const KeyValueConfig& kv, const Tokenizer& tok) {
  EncoderConfig c;
  c.vocab_size = tok.vocab_size();
  c.dim = static_cast<std::size_t>(kv.get_int("encoder.dim", static_cast<long long>(c.dim)));
  c.heads = static_cast<std::size_t>(kv.get_int("encoder.heads", static_cast<long long>(c.heads)));
  c.layers = static_cast<std::size_t>(kv.get_int("encoder.layers", static_cast<long long>(c.layers)));
  c.max_seq = static_cast<std::size_t>(kv.get_int("encoder.max_seq", static_cast<long long>(c.max_seq)));
  c.seed = static_cast<std::uint64_t>(kv.get_int("encoder.seed", static_cast<long long>(c.seed)));
  c.validate();
  return c;
}

// Sorted word list covering a corpus and the prompt texts.
std::vector<std::string> corpus_words(const std::vector<MultiTurnSample>& corpus,
                                      const PromptConfig& prompts) {
  std::set<std::string> words;
  auto add = [&](std::string_view text) {
    for (auto& w : words_of(text)) words.insert(w);
  };
  for (const auto& s : corpus) {
    for (const auto& p : s.pairs) {
      add(p.query_text);
      add(p.target_text);
    }
  }
  for (const auto* text : {&prompts.pi1, &prompts.pi2, &prompts.rephrase_request,
                           &prompts.plain_embed_request}) {
    add(*text);
  }
  return {words.begin(), words.end()};
}

json eval_json(const EvalReport& r) {
  json recall = json::object();
  for (const auto& [k, v] : r.recall_at_k) recall[std::to_string(k)] = v;
  return {{"precision_at_1", r.precision_at_1}, {"recall_at_k", recall},
          {"candidates", r.candidates}, {"queries", r.queries}};
}

json arm_json(const ScalingArm& a, bool trained) {
  json j{{"turns", a.turns}, {"batch", a.batch}, {"effective_batch", a.effective_batch},
         {"pflops_per_iteration", a.pflops_per_iteration}};
  if (trained) {
    j["precision_at_1"] = a.precision_at_1;
    j["initial_loss"] = a.losses.empty() ? 0.0 : a.losses.front();
    j["final_loss"] = a.losses.empty() ? 0.0 : a.losses.back();
  }
  return j;
}

// ---- train / eval -----------------------------------------------------------

struct TrainArgs {
  std::string corpus, config, out = "muco.ckpt", losses;
};

int run_train(const TrainArgs& a) {
  const auto kv = load_config(a.config);
  const auto cfg = TrainConfig::from_config(kv);
  const auto image_tokens = static_cast<std::size_t>(kv.get_int("corpus.image_tokens", 4));
  std::vector<MultiTurnSample> corpus;
  for (const auto& line : read_lines(a.corpus)) {
    corpus.push_back(to_sample(parse_synth_record(line), image_tokens));
  }
  const auto tok = make_tokenizer(kv, corpus_words(corpus, cfg.prompts));
  const auto enc = encoder_config(kv, *tok);
  const auto result = train(corpus, cfg, enc, *tok);

  std::vector<std::pair<std::string, std::string>> extra = {
      {"tokenizer", kv.get_string("tokenizer.kind", "byte")},
      {"image_vocab", std::to_string(tok->image_vocab())},
      {"attention_mode", std::string(attention_mode_name(cfg.attention_mode))}};
  save_encoder(a.out, result.state, extra);
  if (const auto* words = dynamic_cast<const WordTokenizer*>(tok.get())) {
    std::string text;
    for (const auto& w : words->words()) text += w + "\n";
    write_text(a.out + ".vocab", text);
  }

  std::ostringstream csv;
  csv << "step,loss\n";
  csv.precision(17);
  for (std::size_t i = 0; i < result.losses.size(); ++i) csv << i << ',' << result.losses[i] << '\n';
  if (a.losses.empty()) {
    std::cout << csv.str();
  } else {
    write_text(a.losses, csv.str());
  }
  std::cerr << "wrote " << a.out << " (" << result.state.param_count() << " parameters)\n";
  return 0;
}

struct EvalArgs {
  std::string ckpt, pairs, config;
  std::vector<std::size_t> ks{1, 5, 10};
};

int run_eval(const EvalArgs& a) {
  std::vector<std::pair<std::string, std::string>> extra;
  const auto state = load_encoder(a.ckpt, &extra);
  auto kv = load_config(a.config);
  std::string attention = "causal";
  for (const auto& [k, v] : extra) {
    if (k == "tokenizer" && !kv.contains("tokenizer.kind")) kv.set("tokenizer.kind", v);
    if (k == "image_vocab" && !kv.contains("tokenizer.image_vocab")) kv.set("tokenizer.image_vocab", v);
    if (k == "attention_mode") attention = v;
  }
  if (kv.get_string("tokenizer.kind", "byte") == "word" && !kv.contains("tokenizer.vocab_file")) {
    kv.set("tokenizer.vocab_file", a.ckpt + ".vocab");
  }
  const auto tok = make_tokenizer(kv, {});

  std::vector<EvalPair> pairs;
  for (const auto& line : read_lines(a.pairs)) {
    const auto j = json::parse(line);
    pairs.push_back({j.at("image_id").get<std::string>(), j.value("image_tokens", std::size_t{0}),
                     j.at("query").get<std::string>(), j.at("target").get<std::string>()});
  }
  const auto report = evaluate(state, pairs, *tok,
                               parse_attention_mode(kv.get_string("train.attention_mode", attention)),
                               a.ks);
  std::cout << eval_json(report).dump(2) << '\n';
  return 0;
}

// ---- synthetic corpora ------------------------------------------------------

SyntheticSpec synthetic_spec(const KeyValueConfig& kv) {
  SyntheticSpec s;
  auto get = [&](const char* key, std::size_t fallback) {
    return static_cast<std::size_t>(kv.get_int(key, static_cast<long long>(fallback)));
  };
  s.images = get("synthetic.images", s.images);
  s.pairs_per_image = get("synthetic.pairs_per_image", s.pairs_per_image);
  s.heldout_per_image = get("synthetic.heldout_per_image", s.heldout_per_image);
  s.words_per_image = get("synthetic.words_per_image", s.words_per_image);
  s.query_words = get("synthetic.query_words", s.query_words);
  s.target_words = get("synthetic.target_words", s.target_words);
  s.image_tokens = get("synthetic.image_tokens", s.image_tokens);
  s.seed = get("synthetic.seed", s.seed);
  return s;
}

struct ToyArgs {
  std::string config, corpus = "toy_corpus.jsonl", pairs = "toy_pairs.jsonl", vocab = "toy_vocab.txt";
};

int run_toy_corpus(const ToyArgs& a) {
  const auto kv = load_config(a.config);
  const auto corpus = make_separable_corpus(synthetic_spec(kv));
  const auto prompts = PromptConfig::from_config(kv);
  std::string text;
  for (const auto& s : corpus.train) {
    text += to_jsonl(SynthRecord{s.image_id, s.pairs.front().target_text, s.pairs}) + "\n";
  }
  write_text(a.corpus, text);
  text.clear();
  for (const auto& p : corpus.heldout) {
    text += json{{"image_id", p.image_id}, {"image_tokens", p.image_tokens},
                 {"query", p.query}, {"target", p.target}}.dump() + "\n";
  }
  write_text(a.pairs, text);
  auto words = corpus.vocabulary;
  for (const auto& w : corpus_words({}, prompts)) words.push_back(w);
  std::sort(words.begin(), words.end());
  words.erase(std::unique(words.begin(), words.end()), words.end());
  text.clear();
  for (const auto& w : words) text += w + "\n";
  write_text(a.vocab, text);
  std::cout << json{{"images", corpus.train.size()}, {"heldout", corpus.heldout.size()},
                    {"vocabulary", words.size()}}.dump() << '\n';
  return 0;
}

int run_compare_scaling(const std::string& config) {
  const auto kv = load_config(config);
  const auto corpus = make_separable_corpus(synthetic_spec(kv));
  auto tok_kv = kv;
  if (!tok_kv.contains("tokenizer.kind")) tok_kv.set("tokenizer.kind", "word");
  const auto tok = make_tokenizer(tok_kv, corpus.vocabulary);
  const auto cfg = TrainConfig::from_config(kv);
  const auto report = compare_scaling(corpus, cfg, encoder_config(kv, *tok), *tok);
  const json out{{"chance_rate", report.chance_rate},
                 {"single_turn", arm_json(report.single_turn, true)},
                 {"multi_turn", arm_json(report.multi_turn, true)},
                 {"batch_scaled", arm_json(report.batch_scaled, false)}};
  std::cout << out.dump(2) << '\n';
  return 0;
}

// ---- gradcheck --------------------------------------------------------------

struct GradArgs {
  std::size_t dim = 8, images = 2, turns = 2;
  std::uint64_t seed = 0;
  double tol = 1e-6, encoder_tol = 1e-4, tau = 0.02;
  bool skip_encoder = false;
};

// max |a - n| / max |n|
struct GradStats {
  double max_rel = 0.0, max_abs = 0.0;
  std::size_t checked = 0;
};

GradStats compare(const std::vector<double>& analytic, const std::vector<double>& numeric) {
  GradStats s;
  double scale = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    s.max_abs = std::max(s.max_abs, std::abs(analytic[i] - numeric[i]));
    scale = std::max(scale, std::abs(numeric[i]));
  }
  s.max_rel = scale > 0.0 ? s.max_abs / scale : s.max_abs;
  s.checked = analytic.size();
  return s;
}

template <typename F>
double central(F&& f, double& x, double h) {
  const double saved = x;
  x = saved + h;
  const double up = f();
  x = saved - h;
  const double down = f();
  x = saved;
  return (up - down) / (2.0 * h);
}

GradStats loss_gradcheck(const GradArgs& a) {
  std::mt19937_64 gen(a.seed);
  std::normal_distribution<double> normal;
  std::vector<RowLabel> ql, tl;
  for (std::size_t i = 0; i < a.images; ++i) {
    for (std::size_t j = 0; j < a.turns; ++j) {
      ql.push_back({i, j, Role::kQuery, Variant::kOriginal});
      tl.push_back({i, j, Role::kTarget, Variant::kOriginal});
    }
  }
  auto random_rows = [&](std::size_t rows) {
    Matrix m(rows, a.dim);
    for (std::size_t r = 0; r < rows; ++r) {
      double norm = 0.0;
      for (auto& v : m.row(r)) {
        v = normal(gen);
        norm += v * v;
      }
      for (auto& v : m.row(r)) v /= std::sqrt(norm);
    }
    return m;
  };
  auto q = random_rows(ql.size()), t = random_rows(tl.size());
  const auto spec = build_mask_pretrain(ql, tl);
  const auto res = contrastive_loss(q, t, spec, a.tau);
  auto total = [&] { return contrastive_loss(q, t, spec, a.tau).report.total; };
  std::vector<double> analytic, numeric;
  for (auto* m : {&q, &t}) {
    const auto& grad = m == &q ? res.grad_queries : res.grad_targets;
    for (std::size_t i = 0; i < m->size(); ++i) {
      analytic.push_back(grad.data()[i]);
      numeric.push_back(central(total, m->data()[i], 1e-6));
    }
  }
  return compare(analytic, numeric);
}

GradStats encoder_gradcheck(const GradArgs& a) {
  static const char* kWords[] = {"red", "cat", "sky", "dog", "sun", "car", "map", "cup"};
  const ByteTokenizer tok({}, 4);
  EncoderConfig enc;
  enc.vocab_size = tok.vocab_size();
  enc.dim = a.dim;
  enc.heads = a.dim % 2 == 0 ? 2 : 1;
  enc.layers = 1;
  enc.max_seq = 8 + 40 * a.turns;
  enc.seed = a.seed;
  auto state = EncoderState::init(enc);

  std::mt19937_64 gen(a.seed);
  std::vector<MultiTurnSample> batch;
  for (std::size_t i = 0; i < a.images; ++i) {
    MultiTurnSample s{"im" + std::to_string(i), 2, {}};
    for (std::size_t j = 0; j < a.turns; ++j) {
      s.pairs.push_back({std::string(kWords[gen() % 8]) + " " + kWords[gen() % 8],
                         kWords[gen() % 8], TaskTag::kGeneric});
    }
    batch.push_back(std::move(s));
  }
  TrainConfig cfg;
  cfg.loss.temperature = a.tau;
  const auto out = batch_loss_and_grad(state, batch, cfg, tok, a.seed);
  auto params = state.params();
  auto loss = [&] { return batch_loss_and_grad(state, batch, cfg, tok, a.seed).loss; };
  std::vector<double> numeric(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) numeric[i] = central(loss, params[i], 1e-5);
  return compare(out.grads, numeric);
}

int run_gradcheck(const GradArgs& a) {
  if (a.dim == 0 || a.images == 0 || a.turns == 0) {
    throw Error(ErrorCode::kInvalidConfig, "--dim, --images and --turns must be >= 1");
  }
  const auto loss = loss_gradcheck(a);
  bool pass = loss.max_rel < a.tol;
  json report{{"metric", "max|analytic-numeric| / max|numeric|"},
              {"loss", {{"max_rel", loss.max_rel}, {"max_abs", loss.max_abs},
                        {"checked", loss.checked}, {"tol", a.tol}}}};
  if (!a.skip_encoder) {
    const auto enc = encoder_gradcheck(a);
    pass = pass && enc.max_rel < a.encoder_tol;
    report["encoder"] = {{"max_rel", enc.max_rel}, {"max_abs", enc.max_abs},
                         {"checked", enc.checked}, {"tol", a.encoder_tol}};
  }
  report["pass"] = pass;
  std::cout << report.dump(2) << '\n';
  return pass ? 0 : 1;
}

// ---- cost -------------------------------------------------------------------

int run_cost(std::size_t batch, std::size_t turns, const std::string& csv) {
  CostConfig cfg = CostConfig::table5_fitted();
  json out;
  if (!csv.empty()) {
    const auto fit = fit_table5(read_scaling_csv(csv));
    cfg = fit.config;
    out["fit_max_relative_residual"] = fit.max_relative_residual;
  }
  out["pflops"] = iteration_cost(cfg, batch, turns) / 1e15;
  out["effective_batch"] = batch * turns;
  out["ratio"] = efficiency_ratio(cfg, batch, turns);
  std::cout << out.dump(2) << '\n';
  return 0;
}

// ---- datagen ----------------------------------------------------------------

struct SynthArgs {
  std::string in, out, provider;
  std::size_t concurrency = 1;
  bool mock = false;
};

int run_synth(const SynthArgs& a) {
  ProviderConfig cfg;
  if (!a.provider.empty()) {
    cfg = ProviderConfig::from_config(KeyValueConfig::load(a.provider),
                                      fs::path(a.provider).parent_path());
  }
  std::unique_ptr<ChatProvider> provider;
  if (a.mock) {
    provider = std::make_unique<MockChatProvider>(cfg);
  } else {
    provider = std::make_unique<HttpChatProvider>(cfg);
  }
  const auto stats = run_synthesis(read_image_records(a.in), *provider, cfg, {a.out, a.concurrency});
  for (const auto& r : stats.rejections) std::cerr << "rejected " << r << '\n';
  std::cout << json{{"written", stats.written}, {"skipped", stats.skipped},
                    {"rejected", stats.rejected}}.dump() << '\n';
  return 0;
}

int run_validate(const std::string& corpus, const std::string& config) {
  const auto kv = load_config(config);
  const auto tok = make_tokenizer(kv, {});
  const auto r = validate_corpus(corpus, *tok);
  auto lengths = [](const LengthStats& s) {
    json hist = json::object();
    for (const auto& [bucket, n] : s.histogram) hist[std::to_string(bucket)] = n;
    return json{{"count", s.count}, {"min", s.min}, {"max", s.max}, {"mean", s.mean},
                {"histogram", hist}};
  };
  json tags = json::object();
  for (const auto& [tag, n] : r.tag_counts) tags[std::string(task_tag_name(tag))] = n;
  json per_image = json::object();
  for (const auto& [k, n] : r.pairs_per_image) per_image[std::to_string(k)] = n;
  std::cout << json{{"records", r.records}, {"pairs", r.pairs}, {"tag_counts", tags},
                    {"pairs_per_image", per_image}, {"query_tokens", lengths(r.query_tokens)},
                    {"target_tokens", lengths(r.target_tokens)}}.dump(2)
            << '\n';
  return 0;
}

// ---- template ---------------------------------------------------------------

struct AdaptArgs {
  std::string query, target, config, variant;
  std::optional<double> ratio;
  std::uint64_t seed = 0;
};

int run_adapt(const AdaptArgs& a) {
  const auto kv = load_config(a.config);
  auto prompts = PromptConfig::from_config(kv);
  if (a.ratio) prompts.mask_ratio = *a.ratio;
  if (!a.variant.empty()) prompts.variant = parse_template_variant(a.variant);
  const auto t = build_adapted_pair(a.query, a.target, prompts, ChatMarkup::from_config(kv), a.seed);
  std::cout << json{{"query_original", t.query_original}, {"query_augmented", t.query_augmented},
                    {"target_original", t.target_original},
                    {"target_augmented", t.target_augmented}}.dump(2)
            << '\n';
  return 0;
}

// ---- embedding dumps --------------------------------------------------------

struct DumpArgs {
  std::string out;
  std::size_t images = 2, turns = 4, dim = 16;
  std::uint64_t seed = 0;
  bool finetune = false;
};

int run_make_dump(const DumpArgs& a) {
  std::mt19937_64 gen(a.seed);
  std::normal_distribution<double> normal;
  std::vector<RowLabel> ql, tl;
  for (std::size_t i = 0; i < a.images; ++i) {
    if (a.finetune) {
      for (auto v : {Variant::kOriginal, Variant::kAugmented}) {
        ql.push_back({i, 0, Role::kQuery, v});
        tl.push_back({i, 0, Role::kTarget, v});
      }
    } else {
      for (std::size_t j = 0; j < a.turns; ++j) {
        ql.push_back({i, j, Role::kQuery, Variant::kOriginal});
        tl.push_back({i, j, Role::kTarget, Variant::kOriginal});
      }
    }
  }
  auto values = [&](std::size_t rows) {
    std::vector<double> v(rows * a.dim);
    for (auto& x : v) x = normal(gen);
    return v;
  };
  const auto q = EmbeddingMatrix::normalized(ql, a.dim, values(ql.size()));
  const auto t = EmbeddingMatrix::normalized(tl, a.dim, values(tl.size()));
  write_embedding_dump(a.out, q, t);
  std::cout << json{{"queries", q.rows()}, {"targets", t.rows()}, {"dim", a.dim}}.dump() << '\n';
  return 0;
}

struct LossArgs {
  std::string dump, variant = "muco";
  double tau = 0.02;
  bool no_mask = false;
};

int run_loss(const LossArgs& a) {
  const auto [q, t] = read_embedding_dump(a.dump);
  LossConfig cfg;
  cfg.temperature = a.tau;
  cfg.mask_same_image = cfg.mask_counterpart = !a.no_mask;
  cfg.validate();
  const auto variant = parse_loss_variant(a.variant);
  LossResult res = [&] {
    switch (variant) {
      case LossVariant::kNaive: return naive_multipair_loss(q, t, cfg);
      case LossVariant::kSingleTurn: return single_turn_infonce(q, t, cfg);
      case LossVariant::kFinetuneAdapted:
        return muco_loss(q, t, build_mask_finetune(q.labels(), t.labels(), cfg.mask_counterpart), cfg);
      case LossVariant::kMuco: break;
    }
    return muco_loss(q, t, build_mask_pretrain(q.labels(), t.labels(), cfg.mask_same_image), cfg);
  }();
  json terms = json::array();
  for (const auto& [label, v] : res.report.per_term) terms.push_back({{"label", to_string(label)}, {"loss", v}});
  std::cout << std::setprecision(17)
            << json{{"variant", a.variant}, {"temperature", a.tau}, {"loss", res.report.total},
                    {"terms", res.report.per_term.size()},
                    {"effective_negatives", res.report.effective_negatives_per_query},
                    {"per_term", terms}}.dump(2)
            << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"muco: multi-turn contrastive embedding toolkit"};
  app.require_subcommand(1);
  int status = 0;

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train an encoder on a JSONL corpus");
  train_cmd->add_option("--corpus", train_args.corpus, "Corpus JSONL (image_id, dense_caption, pairs)")->required();
  train_cmd->add_option("--config", train_args.config, "TOML config");
  train_cmd->add_option("--out", train_args.out, "Checkpoint path");
  train_cmd->add_option("--losses", train_args.losses, "Write the step,loss CSV here instead of stdout");
  train_cmd->callback([&] { status = run_train(train_args); });

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "Rank held-out pairs with a checkpoint");
  eval_cmd->add_option("--ckpt", eval_args.ckpt, "Checkpoint")->required();
  eval_cmd->add_option("--pairs", eval_args.pairs, "JSONL of {image_id, image_tokens, query, target}")->required();
  eval_cmd->add_option("--config", eval_args.config, "TOML config (tokenizer, markup)");
  eval_cmd->add_option("--k", eval_args.ks, "Recall cutoffs")->delimiter(',');
  eval_cmd->callback([&] { status = run_eval(eval_args); });

  std::string scaling_config;
  auto* scaling_cmd = app.add_subcommand("compare-scaling", "Single-turn vs multi-turn on a synthetic corpus");
  scaling_cmd->add_option("--config", scaling_config, "TOML config")->required();
  scaling_cmd->callback([&] { status = run_compare_scaling(scaling_config); });

  ToyArgs toy_args;
  auto* toy_cmd = app.add_subcommand("toy-corpus", "Write a seeded synthetic corpus, held-out pairs and vocabulary");
  toy_cmd->add_option("--config", toy_args.config, "TOML config ([synthetic] keys)");
  toy_cmd->add_option("--corpus", toy_args.corpus, "Training corpus JSONL");
  toy_cmd->add_option("--pairs", toy_args.pairs, "Held-out pairs JSONL");
  toy_cmd->add_option("--vocab", toy_args.vocab, "Word list");
  toy_cmd->callback([&] { status = run_toy_corpus(toy_args); });

  GradArgs grad_args;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Compare analytic gradients with central differences");
  grad_cmd->add_option("--dim", grad_args.dim, "Embedding / model width");
  grad_cmd->add_option("--images", grad_args.images, "Images in the batch");
  grad_cmd->add_option("--turns", grad_args.turns, "Turns per image");
  grad_cmd->add_option("--seed", grad_args.seed, "Seed");
  grad_cmd->add_option("--tol", grad_args.tol, "Tolerance for the loss-level check");
  grad_cmd->add_option("--encoder-tol", grad_args.encoder_tol, "Tolerance for the encoder check");
  grad_cmd->add_option("--tau", grad_args.tau, "Temperature");
  grad_cmd->add_flag("--skip-encoder", grad_args.skip_encoder, "Only run the loss-level check");
  grad_cmd->callback([&] { status = run_gradcheck(grad_args); });

  std::size_t cost_batch = 1024, cost_turns = 1;
  std::string cost_csv;
  auto* cost_cmd = app.add_subcommand("cost", "Per-iteration training cost");
  cost_cmd->add_option("--batch", cost_batch, "Images per batch");
  cost_cmd->add_option("--turns", cost_turns, "Turns per image");
  cost_cmd->add_option("--fit-table5", cost_csv, "CSV (turns,batch,pflops) to fit the model from");
  cost_cmd->callback([&] { status = run_cost(cost_batch, cost_turns, cost_csv); });

  SynthArgs synth_args;
  auto* synth_cmd = app.add_subcommand("synth", "Caption images and generate query/positive pairs");
  synth_cmd->add_option("--in", synth_args.in, "ImageRecord JSONL")->required();
  synth_cmd->add_option("--out", synth_args.out, "SynthRecord JSONL (appended, resumable)")->required();
  synth_cmd->add_option("--provider", synth_args.provider, "Provider TOML");
  synth_cmd->add_option("--concurrency", synth_args.concurrency, "Concurrent provider calls");
  synth_cmd->add_flag("--mock", synth_args.mock, "Use the deterministic offline provider");
  synth_cmd->callback([&] { status = run_synth(synth_args); });

  std::string validate_corpus_path, validate_config;
  auto* validate_cmd = app.add_subcommand("validate", "Schema-check a SynthRecord corpus and report statistics");
  validate_cmd->add_option("--corpus", validate_corpus_path, "SynthRecord JSONL")->required();
  validate_cmd->add_option("--config", validate_config, "TOML config (tokenizer)");
  validate_cmd->callback([&] { status = run_validate(validate_corpus_path, validate_config); });

  std::string mask_text, mask_token = ChatMarkup{}.mask_token;
  double mask_ratio = 0.5;
  std::uint64_t mask_seed = 0;
  auto* mask_cmd = app.add_subcommand("mask-demo", "Mask a fraction of the words in a text");
  mask_cmd->add_option("--text", mask_text, "Input text")->required();
  mask_cmd->add_option("--ratio", mask_ratio, "Fraction of words to mask");
  mask_cmd->add_option("--seed", mask_seed, "Seed");
  mask_cmd->add_option("--mask-token", mask_token, "Replacement token");
  mask_cmd->callback([&] { std::cout << mask_words(mask_text, mask_ratio, mask_seed, mask_token) << '\n'; });

  AdaptArgs adapt_args;
  double adapt_ratio = 0.5;
  auto* adapt_cmd = app.add_subcommand("adapt", "Render both forms of a query/target pair");
  adapt_cmd->add_option("--query", adapt_args.query, "Query text")->required();
  adapt_cmd->add_option("--target", adapt_args.target, "Target text")->required();
  adapt_cmd->add_option("--config", adapt_args.config, "TOML config ([markup], [prompt])");
  auto* ratio_opt = adapt_cmd->add_option("--mask-ratio", adapt_ratio, "Fraction of counterpart words to mask");
  adapt_cmd->add_option("--template-variant", adapt_args.variant,
                        "reconstruction, rephrasing, self_reconstruction or no_guidance");
  adapt_cmd->add_option("--seed", adapt_args.seed, "Seed");
  adapt_cmd->callback([&] {
    if (ratio_opt->count() > 0) adapt_args.ratio = adapt_ratio;
    status = run_adapt(adapt_args);
  });

  DumpArgs dump_args;
  auto* dump_cmd = app.add_subcommand("make-dump", "Write random unit-norm query/target buffers");
  dump_cmd->add_option("--out", dump_args.out, "Output path")->required();
  dump_cmd->add_option("--images", dump_args.images, "Images");
  dump_cmd->add_option("--turns", dump_args.turns, "Turns per image");
  dump_cmd->add_option("--dim", dump_args.dim, "Row width");
  dump_cmd->add_option("--seed", dump_args.seed, "Seed");
  dump_cmd->add_flag("--finetune", dump_args.finetune, "Original/augmented labels instead of turns");
  dump_cmd->callback([&] { status = run_make_dump(dump_args); });

  LossArgs loss_args;
  auto* loss_cmd = app.add_subcommand("loss", "Compute a contrastive loss from dumped buffers");
  loss_cmd->add_option("--dump", loss_args.dump, "Embedding dump")->required();
  loss_cmd->add_option("--variant", loss_args.variant, "muco, naive, single_turn or finetune_adapted");
  loss_cmd->add_option("--tau", loss_args.tau, "Temperature");
  loss_cmd->add_flag("--no-mask", loss_args.no_mask, "Disable same-image / counterpart masking");
  loss_cmd->callback([&] { status = run_loss(loss_args); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const Error& e) {
    std::cerr << "error [" << error_code_name(e.code()) << "]: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return status;
}
