// Copyright 2026 The muco Authors
// SPDX-License-Identifier: Apache-2.0

#include "muco/datagen.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"

namespace muco {
namespace {

using json = nlohmann::ordered_json;

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::size_t tag_slot(TaskTag tag) { return static_cast<std::size_t>(tag); }

void add_length(LengthStats& s, std::size_t n) {
  if (s.count == 0 || n < s.min) s.min = n;
  s.max = std::max(s.max, n);
  s.mean += (static_cast<double>(n) - s.mean) / static_cast<double>(++s.count);
  ++s.histogram[n / 8 * 8];
}

std::filesystem::path caption_store_path(const std::filesystem::path& output) {
  auto p = output;
  p += ".captions.jsonl";
  return p;
}

// Lines of a JSONL file; missing file -> empty.
std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::vector<std::string> lines;
  std::ifstream in(path, std::ios::binary);
  if (!in) return lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

}  // namespace

bool passes_resolution_filter(const ImageRecord& record) {
  return std::max(record.width, record.height) >= kMinResolution;
}

std::string caption(const ImageRecord& record, ChatProvider& provider,
                    const ProviderConfig& cfg) {
  if (!passes_resolution_filter(record)) {
    throw Error(ErrorCode::kResolutionFiltered,
                "image '" + record.image_id + "' is " + std::to_string(record.width) + "x" +
                    std::to_string(record.height) + "; need one side >= 512");
  }
  std::ostringstream user;
  user << "image_id: " << record.image_id << "\nwidth: " << record.width
       << "\nheight: " << record.height << "\n";
  auto text = complete_with_retries(provider, cfg,
                                    {{"system", cfg.caption_prompt}, {"user", user.str()}});
  return std::string(trim(text));
}

std::vector<TurnPair> parse_pair_blocks(std::string_view text, std::string_view caption_text) {
  struct Block {
    TaskTag tag;
    std::optional<std::string> query;
    std::optional<std::string> positive;
  };
  std::vector<Block> blocks;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& what) {
    throw Error(ErrorCode::kParseFailure, "line " + std::to_string(line_no) + ": " + what);
  };
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    const auto line = trim(text.substr(pos, nl - pos));
    pos = nl + 1;
    ++line_no;
    if (line.empty()) continue;
    const auto colon = line.find(':');
    if (colon == std::string_view::npos) fail("expected KEY: value");
    const auto key = lower(trim(line.substr(0, colon)));
    const auto value = std::string(trim(line.substr(colon + 1)));
    if (key == "task") {
      const auto tag = parse_task_tag(lower(value));
      if (!tag || *tag == TaskTag::kGeneric) fail("unknown task '" + value + "'");
      blocks.push_back({*tag, std::nullopt, std::nullopt});
      continue;
    }
    if (blocks.empty()) fail(key + " before any TASK");
    auto& b = blocks.back();
    if (key == "query") {
      if (b.query) fail("duplicate QUERY");
      b.query = value;
    } else if (key == "positive") {
      if (b.positive) fail("duplicate POSITIVE");
      b.positive = value;
    } else {
      fail("unknown key '" + key + "'");
    }
  }

  std::vector<TurnPair> pairs;
  std::array<std::size_t, 5> counts{};
  for (const auto& b : blocks) {
    if (!b.query || b.query->empty()) {
      throw Error(ErrorCode::kParseFailure, "block without a QUERY");
    }
    std::string positive;
    if (b.tag == TaskTag::kRet) {
      positive = std::string(caption_text);
    } else {
      if (!b.positive || b.positive->empty()) {
        throw Error(ErrorCode::kParseFailure, "block without a POSITIVE");
      }
      positive = *b.positive;
    }
    ++counts[tag_slot(b.tag)];
    pairs.push_back({*b.query, std::move(positive), b.tag});
  }
  if (pairs.size() != kPairsPerImage) {
    throw Error(ErrorCode::kCardinalityViolation,
                "expected 7 pairs, got " + std::to_string(pairs.size()));
  }
  if (counts != kTagQuota) {
    throw Error(ErrorCode::kCardinalityViolation, "task tags do not follow the 1/1/2/2/1 quota");
  }
  return pairs;
}

SynthRecord synth_pairs(std::string_view image_id, std::string_view caption_text,
                        ChatProvider& provider, const ProviderConfig& cfg) {
  if (trim(caption_text).empty()) throw Error(ErrorCode::kEmptyText, "caption is empty");
  std::string user = "image_id: " + std::string(image_id) + "\ncaption: " +
                     std::string(caption_text) + "\n";
  const auto text =
      complete_with_retries(provider, cfg, {{"system", cfg.pairgen_prompt}, {"user", user}});
  SynthRecord rec{std::string(image_id), std::string(caption_text),
                  parse_pair_blocks(text, caption_text)};
  std::set<std::string_view> queries;
  for (const auto& p : rec.pairs) {
    if (!queries.insert(p.query_text).second) {
      throw Error(ErrorCode::kDuplicateQuery, "query repeats: " + p.query_text);
    }
  }
  return rec;
}

void validate_synth_record(const SynthRecord& record) {
  auto bad = [&](const std::string& what) {
    throw Error(ErrorCode::kSchemaViolation, "record '" + record.image_id + "': " + what);
  };
  if (record.image_id.empty()) bad("empty image_id");
  if (trim(record.dense_caption).empty()) bad("empty dense_caption");
  if (record.pairs.size() != kPairsPerImage) {
    bad("expected 7 pairs, got " + std::to_string(record.pairs.size()));
  }
  std::array<std::size_t, 5> counts{};
  std::set<std::string_view> queries;
  for (const auto& p : record.pairs) {
    if (p.task_tag == TaskTag::kGeneric) bad("generic task tag");
    ++counts[tag_slot(p.task_tag)];
    if (trim(p.query_text).empty() || trim(p.target_text).empty()) bad("empty pair text");
    if (!queries.insert(p.query_text).second) bad("duplicate query '" + p.query_text + "'");
    if (p.task_tag == TaskTag::kRet && p.target_text != record.dense_caption) {
      bad("retrieval positive differs from the dense caption");
    }
  }
  if (counts != kTagQuota) bad("task tags do not follow the 1/1/2/2/1 quota");
}

std::string to_jsonl(const SynthRecord& record) {
  json j;
  j["image_id"] = record.image_id;
  j["dense_caption"] = record.dense_caption;
  j["pairs"] = json::array();
  for (const auto& p : record.pairs) {
    j["pairs"].push_back(
        json{{"task", task_tag_name(p.task_tag)}, {"query", p.query_text}, {"positive", p.target_text}});
  }
  return j.dump();
}

SynthRecord parse_synth_record(std::string_view line) {
  try {
    const auto j = json::parse(line);
    SynthRecord rec;
    rec.image_id = j.at("image_id").get<std::string>();
    rec.dense_caption = j.at("dense_caption").get<std::string>();
    for (const auto& p : j.at("pairs")) {
      const auto tag = parse_task_tag(p.at("task").get<std::string>());
      if (!tag) throw Error(ErrorCode::kSchemaViolation, "unknown task tag");
      rec.pairs.push_back({p.at("query").get<std::string>(), p.at("positive").get<std::string>(), *tag});
    }
    return rec;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kSchemaViolation, e.what());
  }
}

std::string to_jsonl(const ImageRecord& record) {
  json j;
  j["image_id"] = record.image_id;
  j["width"] = record.width;
  j["height"] = record.height;
  if (record.dense_caption) j["dense_caption"] = *record.dense_caption;
  return j.dump();
}

std::vector<ImageRecord> read_image_records(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::vector<ImageRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      const auto j = json::parse(line);
      ImageRecord r;
      r.image_id = j.at("image_id").get<std::string>();
      r.width = j.at("width").get<std::size_t>();
      r.height = j.at("height").get<std::size_t>();
      if (j.contains("dense_caption") && !j["dense_caption"].is_null()) {
        r.dense_caption = j["dense_caption"].get<std::string>();
      }
      out.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw SchemaError(line_no, e.what());
    }
  }
  return out;
}

MultiTurnSample to_sample(const SynthRecord& record, std::size_t image_tokens) {
  return {record.image_id, image_tokens, record.pairs};
}

PipelineStats run_synthesis(const std::vector<ImageRecord>& records, ChatProvider& provider,
                            const ProviderConfig& cfg, const PipelineOptions& opts) {
  cfg.validate();
  PipelineStats stats;

  std::unordered_set<std::string> done;
  for (const auto& line : read_lines(opts.output)) {
    if (trim(line).empty()) continue;
    done.insert(parse_synth_record(line).image_id);
  }
  const auto store_path = caption_store_path(opts.output);
  std::unordered_map<std::string, std::string> stored_captions;
  for (const auto& line : read_lines(store_path)) {
    if (trim(line).empty()) continue;
    const auto j = json::parse(line);
    stored_captions[j.at("image_id").get<std::string>()] = j.at("dense_caption").get<std::string>();
  }

  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (done.count(records[i].image_id)) {
      ++stats.skipped;
    } else {
      pending.push_back(i);
    }
  }

  std::ofstream out(opts.output, std::ios::binary | std::ios::app);
  std::ofstream store(store_path, std::ios::binary | std::ios::app);
  if (!out || !store) throw Error(ErrorCode::kIo, "cannot append to " + opts.output.string());

  // Results are committed strictly in input order by whichever worker
  // completes the next expected slot.
  std::mutex mu;
  std::vector<std::optional<std::string>> results(pending.size());
  std::vector<bool> finished(pending.size(), false);
  std::size_t next_commit = 0;
  std::atomic<std::size_t> next_task{0};

  auto commit = [&](std::size_t slot, std::optional<std::string> line, std::string rejection) {
    std::lock_guard lock(mu);
    results[slot] = std::move(line);
    finished[slot] = true;
    if (!rejection.empty()) {
      ++stats.rejected;
      stats.rejections.push_back(std::move(rejection));
    }
    while (next_commit < pending.size() && finished[next_commit]) {
      if (results[next_commit]) {
        out << *results[next_commit] << '\n';
        ++stats.written;
        results[next_commit].reset();
      }
      ++next_commit;
    }
    out.flush();
  };

  auto worker = [&] {
    while (true) {
      const auto slot = next_task.fetch_add(1);
      if (slot >= pending.size()) return;
      const auto& rec = records[pending[slot]];
      try {
        std::string text;
        if (rec.dense_caption && !trim(*rec.dense_caption).empty()) {
          text = *rec.dense_caption;
        } else {
          std::optional<std::string> cached;
          {
            std::lock_guard lock(mu);
            if (auto it = stored_captions.find(rec.image_id); it != stored_captions.end()) {
              cached = it->second;
            }
          }
          if (cached) {
            text = *cached;
          } else {
            text = caption(rec, provider, cfg);
            std::lock_guard lock(mu);
            stored_captions[rec.image_id] = text;
            store << json{{"image_id", rec.image_id}, {"dense_caption", text}}.dump() << '\n';
            store.flush();
          }
        }
        auto synth = synth_pairs(rec.image_id, text, provider, cfg);
        validate_synth_record(synth);
        commit(slot, to_jsonl(synth), {});
      } catch (const Error& e) {
        commit(slot, std::nullopt, rec.image_id + ": " + e.what());
      }
    }
  };

  const auto threads = std::max<std::size_t>(1, std::min(opts.concurrency, cfg.max_in_flight));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::sort(stats.rejections.begin(), stats.rejections.end());
  return stats;
}

CorpusReport validate_corpus(const std::filesystem::path& path, const Tokenizer& tokenizer) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  CorpusReport report;
  std::unordered_set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    SynthRecord rec;
    try {
      rec = parse_synth_record(line);
      validate_synth_record(rec);
    } catch (const Error& e) {
      throw SchemaError(line_no, e.what());
    }
    if (!ids.insert(rec.image_id).second) {
      throw SchemaError(line_no, "image_id '" + rec.image_id + "' repeats");
    }
    ++report.records;
    ++report.pairs_per_image[rec.pairs.size()];
    for (const auto& p : rec.pairs) {
      ++report.pairs;
      ++report.tag_counts[p.task_tag];
      add_length(report.query_tokens, tokenizer.encode(p.query_text).size());
      add_length(report.target_tokens, tokenizer.encode(p.target_text).size());
    }
  }
  return report;
}

}  // namespace muco
