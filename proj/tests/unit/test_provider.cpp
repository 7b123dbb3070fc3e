// Copyright 2026 The muco Authors
// SPDX-License-Identifier: Apache-2.0

#include <atomic>
#include <filesystem>
#include <fstream>
#include <thread>

#include "doctest.h"
#include "httplib.h"
#include "json.hpp"
#include "muco/error.hpp"
#include "muco/kvconfig.hpp"
#include "muco/provider.hpp"

using namespace muco;
using json = nlohmann::json;

namespace {

ProviderConfig test_config() {
  ProviderConfig cfg;
  cfg.caption_prompt = "caption please";
  cfg.pairgen_prompt = "pairs please";
  cfg.max_retries = 3;
  cfg.backoff_initial = std::chrono::milliseconds(1);
  cfg.timeout = std::chrono::milliseconds(2000);
  return cfg;
}

// Serves the chat contract on an ephemeral port; the first `failures`
// requests answer 503.
class FakeServer {
 public:
  explicit FakeServer(int failures, std::string reply = "hello")
      : failures_(failures), reply_(std::move(reply)) {
    server_.Post("/v1/chat", [this](const httplib::Request& req, httplib::Response& res) {
      const auto body = json::parse(req.body);
      last_model_ = body.at("model").get<std::string>();
      last_roles_ = body.at("messages").size();
      if (hits_++ < failures_) {
        res.status = 503;
        return;
      }
      res.set_content(json{{"content", reply_}}.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeServer() {
    server_.stop();
    thread_.join();
  }
  std::string endpoint() const {
    return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat";
  }
  int hits() const { return hits_.load(); }
  std::string last_model_;
  std::size_t last_roles_ = 0;

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  int failures_;
  std::string reply_;
  std::atomic<int> hits_{0};
};

class ScriptedProvider : public ChatProvider {
 public:
  explicit ScriptedProvider(std::vector<std::string> replies) : replies_(std::move(replies)) {}
  std::string complete(const std::vector<ChatMessage>&) override {
    const auto i = calls++;
    if (replies_[std::min(i, replies_.size() - 1)] == "!transient") {
      throw ProviderError(true, "flaky");
    }
    if (replies_[std::min(i, replies_.size() - 1)] == "!fatal") {
      throw ProviderError(false, "bad request");
    }
    return replies_[std::min(i, replies_.size() - 1)];
  }
  std::size_t calls = 0;

 private:
  std::vector<std::string> replies_;
};

}  // namespace

TEST_SUITE("provider") {
  TEST_CASE("http provider retries 5xx and speaks the chat contract") {
    FakeServer server(2, "a dense caption");
    auto cfg = test_config();
    cfg.endpoint = server.endpoint();
    cfg.model_name = "m1";
    HttpChatProvider provider(cfg);
    const auto text =
        complete_with_retries(provider, cfg, {{"system", "s"}, {"user", "image_id: x"}});
    CHECK(text == "a dense caption");
    CHECK(server.hits() == 3);
    CHECK(server.last_model_ == "m1");
    CHECK(server.last_roles_ == 2);
  }

  TEST_CASE("http provider gives up after max_retries") {
    FakeServer server(100);
    auto cfg = test_config();
    cfg.endpoint = server.endpoint();
    cfg.max_retries = 2;
    HttpChatProvider provider(cfg);
    try {
      complete_with_retries(provider, cfg, {{"system", "s"}, {"user", "u"}});
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kProviderUnavailable);
    }
    CHECK(server.hits() == 3);
  }

  TEST_CASE("unreachable endpoint is transient") {
    auto cfg = test_config();
    cfg.endpoint = "http://127.0.0.1:1/v1/chat";
    cfg.max_retries = 1;
    HttpChatProvider provider(cfg);
    try {
      provider.complete({{"user", "u"}});
      FAIL("expected an error");
    } catch (const ProviderError& e) {
      CHECK(e.transient());
    }
  }

  TEST_CASE("empty responses are retried then reported") {
    auto cfg = test_config();
    ScriptedProvider p({"", "  ", "done"});
    CHECK(complete_with_retries(p, cfg, {}) == "done");
    ScriptedProvider empty({""});
    try {
      complete_with_retries(empty, cfg, {});
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kEmptyResponse);
    }
    CHECK(empty.calls == 4);
  }

  TEST_CASE("non-transient failures are not retried") {
    auto cfg = test_config();
    ScriptedProvider p({"!fatal", "ok"});
    CHECK_THROWS_AS(complete_with_retries(p, cfg, {}), ProviderError);
    CHECK(p.calls == 1);
    ScriptedProvider q({"!transient", "ok"});
    CHECK(complete_with_retries(q, cfg, {}) == "ok");
  }

  TEST_CASE("mock provider is pure in prompt and image id") {
    const auto cfg = test_config();
    MockChatProvider a(cfg), b(cfg);
    const std::vector<ChatMessage> msg = {{"system", cfg.caption_prompt}, {"user", "image_id: i9\n"}};
    CHECK(a.complete(msg) == b.complete(msg));
    CHECK(a.complete(msg) != a.complete({{"system", cfg.caption_prompt}, {"user", "image_id: i8"}}));
    CHECK(a.calls() == 3);
    CHECK_THROWS_AS(a.complete({{"system", "other"}, {"user", "image_id: i9"}}), ProviderError);
  }

  TEST_CASE("config from file resolves prompt files") {
    const auto dir = std::filesystem::temp_directory_path() / "muco_provider_cfg";
    std::filesystem::create_directories(dir);
    std::ofstream(dir / "cap.txt") << "CAPTION PROMPT";
    const auto cfg = ProviderConfig::from_config(
        KeyValueConfig::parse("[provider]\nmodel = \"x\"\nmax_retries = 5\n"
                              "caption_prompt_file = \"cap.txt\"\npairgen_prompt = \"P\"\n"),
        dir);
    CHECK(cfg.caption_prompt == "CAPTION PROMPT");
    CHECK(cfg.pairgen_prompt == "P");
    CHECK(cfg.max_retries == 5);
    CHECK_THROWS_AS(ProviderConfig::from_config(KeyValueConfig::parse("[provider]\nmax_retries = -1\n")),
                    Error);
  }
}
