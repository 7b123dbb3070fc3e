// Copyright 2026 The muco Authors
// SPDX-License-Identifier: Apache-2.0

#include "muco/provider.hpp"

#include <array>
#include <fstream>
#include <sstream>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "muco/kvconfig.hpp"
#include "muco/rng.hpp"
#include "muco/types.hpp"

namespace muco {
namespace {

using json = nlohmann::ordered_json;

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Value following "key: " on its own line of `text`, or empty.
std::string field(std::string_view text, std::string_view key) {
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    const auto line = text.substr(pos, nl - pos);
    if (line.starts_with(key) && line.size() > key.size() && line[key.size()] == ':') {
      return std::string(trim(line.substr(key.size() + 1)));
    }
    pos = nl + 1;
  }
  return {};
}

template <std::size_t N>
std::string_view pick(const std::array<std::string_view, N>& words, Rng& rng) {
  return words[rng.uniform_index(N)];
}

constexpr std::array<std::string_view, 8> kAdjectives = {
    "red", "weathered", "small", "bright", "wooden", "striped", "quiet", "crowded"};
constexpr std::array<std::string_view, 8> kSubjects = {
    "bicycle", "harbor", "kitchen", "street market", "mountain cabin", "train platform",
    "garden", "bookstore"};
constexpr std::array<std::string_view, 8> kObjects = {
    "lamp post", "blue umbrella", "stack of crates", "parked van", "potted fern",
    "chalkboard sign", "pair of boots", "ceramic mug"};
constexpr std::array<std::string_view, 4> kLight = {"morning", "overcast", "evening", "indoor"};

std::string mock_caption(std::string_view image_id) {
  Rng rng(fnv1a(image_id));
  std::ostringstream os;
  os << "A " << pick(kAdjectives, rng) << " " << pick(kSubjects, rng) << " in "
     << pick(kLight, rng) << " light. On the left a " << pick(kObjects, rng)
     << " stands beside a " << pick(kAdjectives, rng) << " " << pick(kObjects, rng)
     << "; in the background " << (2 + rng.uniform_index(5)) << " "
     << pick(kObjects, rng) << "s are visible (" << image_id << ").";
  return os.str();
}

std::string mock_pairs(std::string_view image_id, std::string_view caption) {
  Rng rng(fnv1a(image_id) ^ 0x5bd1e995ULL);
  const auto subject = pick(kSubjects, rng);
  const auto object = pick(kObjects, rng);
  const auto adjective = pick(kAdjectives, rng);
  std::ostringstream os;
  auto block = [&](std::string_view task, const std::string& q, const std::string& p) {
    os << "TASK: " << task << "\nQUERY: " << q << "\n";
    if (!p.empty()) os << "POSITIVE: " << p << "\n";
    os << "\n";
  };
  const std::string tag = " [" + std::string(image_id) + "]";
  block("cls", "What is the dominant category of this image?" + tag, std::string(subject));
  block("ret", "Find a detailed description of this scene" + tag, std::string(caption));
  block("global_vqa", "What is the overall setting?" + tag,
        "A " + std::string(adjective) + " " + std::string(subject));
  block("global_vqa", "What time of day does the scene suggest?" + tag,
        "The lighting suggests a calm part of the day");
  block("local_vqa", "What stands on the left side?" + tag, "A " + std::string(object));
  block("local_vqa", "How many objects are in the background?" + tag,
        "Several items are visible in the background");
  block("creative_vqa", "Write a short story title for this scene" + tag,
        "Notes from the " + std::string(subject));
  return os.str();
}

void parse_endpoint(const std::string& endpoint, std::string& base, std::string& path) {
  const auto scheme = endpoint.find("://");
  if (scheme == std::string::npos) {
    throw Error(ErrorCode::kInvalidConfig, "endpoint must be an absolute URL: " + endpoint);
  }
  const auto slash = endpoint.find('/', scheme + 3);
  base = endpoint.substr(0, slash);
  path = slash == std::string::npos ? "/" : endpoint.substr(slash);
}

}  // namespace

void ProviderConfig::validate() const {
  if (max_retries < 0) throw Error(ErrorCode::kInvalidConfig, "max_retries must be >= 0");
  if (max_in_flight == 0) throw Error(ErrorCode::kInvalidConfig, "max_in_flight must be >= 1");
  if (caption_prompt.empty() || pairgen_prompt.empty()) {
    throw Error(ErrorCode::kInvalidConfig, "caption_prompt and pairgen_prompt must be set");
  }
}

ProviderConfig ProviderConfig::from_config(const KeyValueConfig& cfg,
                                           const std::filesystem::path& base_dir) {
  ProviderConfig p;
  p.endpoint = cfg.get_string("provider.endpoint", p.endpoint);
  p.model_name = cfg.get_string("provider.model", p.model_name);
  p.max_retries = static_cast<int>(cfg.get_int("provider.max_retries", p.max_retries));
  p.timeout = std::chrono::milliseconds(cfg.get_int("provider.timeout_ms", p.timeout.count()));
  p.backoff_initial = std::chrono::milliseconds(
      cfg.get_int("provider.backoff_initial_ms", p.backoff_initial.count()));
  p.max_in_flight =
      static_cast<std::size_t>(cfg.get_int("provider.max_in_flight", static_cast<long long>(p.max_in_flight)));
  auto prompt = [&](const std::string& key) {
    if (auto inline_text = cfg.get("provider." + key)) return *inline_text;
    if (auto file = cfg.get("provider." + key + "_file")) {
      std::filesystem::path path(*file);
      if (path.is_relative()) path = base_dir / path;
      return read_file(path);
    }
    return std::string();
  };
  p.caption_prompt = prompt("caption_prompt");
  p.pairgen_prompt = prompt("pairgen_prompt");
  p.validate();
  return p;
}

HttpChatProvider::HttpChatProvider(ProviderConfig cfg) : cfg_(std::move(cfg)) {
  parse_endpoint(cfg_.endpoint, base_url_, path_);
}

std::string HttpChatProvider::complete(const std::vector<ChatMessage>& messages) {
  json body;
  body["model"] = cfg_.model_name;
  body["messages"] = json::array();
  for (const auto& m : messages) {
    body["messages"].push_back(json{{"role", m.role}, {"content", m.content}});
  }

  httplib::Client client(base_url_);
  const auto secs = cfg_.timeout.count() / 1000;
  const auto usecs = (cfg_.timeout.count() % 1000) * 1000;
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);

  auto res = client.Post(path_, body.dump(), "application/json");
  if (!res) {
    throw ProviderError(true, "request to " + cfg_.endpoint + " failed: " +
                                  httplib::to_string(res.error()));
  }
  if (res->status >= 500) {
    throw ProviderError(true, "server error " + std::to_string(res->status));
  }
  if (res->status != 200) {
    throw ProviderError(false, "unexpected status " + std::to_string(res->status));
  }
  if (res->body.empty()) return {};
  try {
    const auto parsed = json::parse(res->body);
    return parsed.at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw ProviderError(false, std::string("malformed response body: ") + e.what());
  }
}

std::string MockChatProvider::complete(const std::vector<ChatMessage>& messages) {
  ++calls_;
  if (messages.size() < 2) throw ProviderError(false, "mock expects system and user messages");
  const auto& system = messages.front().content;
  const auto& user = messages.back().content;
  const auto image_id = field(user, "image_id");
  if (system == cfg_.caption_prompt) return mock_caption(image_id);
  if (system == cfg_.pairgen_prompt) return mock_pairs(image_id, field(user, "caption"));
  throw ProviderError(false, "mock received an unknown prompt");
}

std::string complete_with_retries(ChatProvider& provider, const ProviderConfig& cfg,
                                  const std::vector<ChatMessage>& messages) {
  auto delay = cfg.backoff_initial;
  bool last_was_empty = false;
  std::string last_error = "no attempt made";
  for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(delay);
      delay *= 2;
    }
    try {
      auto text = provider.complete(messages);
      if (!trim(text).empty()) return text;
      last_was_empty = true;
    } catch (const ProviderError& e) {
      if (!e.transient()) throw;
      last_was_empty = false;
      last_error = e.what();
    }
  }
  if (last_was_empty) {
    throw Error(ErrorCode::kEmptyResponse,
                "provider returned an empty response after " +
                    std::to_string(cfg.max_retries + 1) + " attempts");
  }
  throw ProviderError(true, "giving up after " + std::to_string(cfg.max_retries + 1) +
                                " attempts: " + last_error);
}

}  // namespace muco
