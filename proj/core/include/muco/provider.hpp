// Copyright 2026 The muco Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "muco/error.hpp"

namespace muco {

class KeyValueConfig;

struct ChatMessage {
  std::string role;
  std::string content;
};

struct ProviderConfig {
  std::string endpoint = "http://127.0.0.1:8000/v1/chat";
  std::string model_name = "caption-model";
  std::string caption_prompt;
  std::string pairgen_prompt;
  int max_retries = 3;
  std::chrono::milliseconds timeout{30000};
  std::chrono::milliseconds backoff_initial{200};
  std::size_t max_in_flight = 4;

  void validate() const;

  // Keys under `provider.`; *_prompt_file paths resolve relative to `base_dir`.
  static ProviderConfig from_config(const KeyValueConfig& cfg,
                                    const std::filesystem::path& base_dir = {});
};

// A failed provider call. Transient failures (5xx, timeouts, refused
// connections) are retried; others are not.
class ProviderError : public Error {
 public:
  ProviderError(bool transient, const std::string& message)
      : Error(ErrorCode::kProviderUnavailable, message), transient_(transient) {}
  bool transient() const noexcept { return transient_; }

 private:
  bool transient_;
};

class ChatProvider {
 public:
  virtual ~ChatProvider() = default;
  // Returns the response text; throws ProviderError.
  virtual std::string complete(const std::vector<ChatMessage>& messages) = 0;
};

// Chat-completion over HTTP:
//   POST <endpoint>  {"model": ..., "messages": [{"role", "content"}, ...]}
//   200              {"content": "..."}
class HttpChatProvider final : public ChatProvider {
 public:
  explicit HttpChatProvider(ProviderConfig cfg);
  std::string complete(const std::vector<ChatMessage>& messages) override;

 private:
  ProviderConfig cfg_;
  std::string base_url_;
  std::string path_;
};

// Deterministic stand-in: the response is a pure function of the system
// prompt and the image id named in the user message.
class MockChatProvider final : public ChatProvider {
 public:
  explicit MockChatProvider(ProviderConfig cfg) : cfg_(std::move(cfg)) {}
  std::string complete(const std::vector<ChatMessage>& messages) override;

  std::size_t calls() const { return calls_.load(); }

 private:
  ProviderConfig cfg_;
  std::atomic<std::size_t> calls_{0};
};

// Calls `provider`, retrying transient failures and empty responses with
// exponential backoff up to cfg.max_retries extra attempts. Throws
// ProviderUnavailable or EmptyResponse once retries are exhausted.
std::string complete_with_retries(ChatProvider& provider, const ProviderConfig& cfg,
                                  const std::vector<ChatMessage>& messages);

}  // namespace muco
