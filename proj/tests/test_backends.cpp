// Copyright 2026 The finecap Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <filesystem>
#include <mutex>
#include <set>
#include <thread>

#include "doctest.h"
#include "finecap/backends.hpp"
#include "finecap/digest.hpp"
#include "finecap/frames.hpp"
#include "finecap/io.hpp"
#include "support.hpp"
// After support.hpp: resolv.h, pulled in by httplib, defines a `_res` macro
// that breaks Eigen.
#include "httplib.h"
#include "json.hpp"

using namespace finecap;
using finecap::testing::Rng;
using finecap::testing::TempDir;

namespace {

// Transport replaying a fixed script of outcomes; the last entry repeats.
class ScriptedTransport : public ChatTransport {
 public:
  enum class Step { kOk, kEmpty, kNetwork, kAuth };
  explicit ScriptedTransport(std::vector<Step> steps) : steps_(std::move(steps)) {}
  std::string send(Role, const ChatRequest& req) override {
    const Step s = steps_[std::min(calls_, steps_.size() - 1)];
    ++calls_;
    switch (s) {
      case Step::kOk: return "echo: " + req.user;
      case Step::kEmpty: return "";
      case Step::kNetwork: throw TransportError(TransportError::Kind::kRetryable, "connection refused");
      case Step::kAuth: throw TransportError(TransportError::Kind::kAuth, "HTTP 401");
    }
    return "";
  }
  std::string model_name() const override { return "scripted"; }
  std::size_t calls() const { return calls_; }

 private:
  std::vector<Step> steps_;
  std::size_t calls_ = 0;
};

RetryPolicy recording_policy(int retries, std::vector<double>* sleeps) {
  RetryPolicy p;
  p.max_retries = retries;
  p.sleep = [sleeps](double s) { sleeps->push_back(s); };
  return p;
}

ChatRequest simple(const std::string& user) {
  ChatRequest r;
  r.user = user;
  r.temperature = 0.0;
  return r;
}

}  // namespace

TEST_CASE("mock rule echoing the first three words") {
  const auto rules = parse_mock_rules(
      R"js([{"role": "llm", "match": "^(\\S+ \\S+ \\S+)", "output": "{{1}}"}])js");
  auto transport = std::make_shared<MockChatTransport>(rules);
  ChatClient client(Role::kLlm, transport, std::nullopt, RetryPolicy{});
  CHECK(client.chat(simple("a dog runs fast")).text == "a dog runs");
  // No rule for the role: a fatal error, not a retry loop.
  ChatClient other(Role::kImageLmm, transport, std::nullopt, RetryPolicy{});
  CHECK_THROWS_AS(other.chat(simple("a dog runs fast")), BackendError);
}

TEST_CASE("mock templates and directives") {
  const auto rules = parse_mock_rules(R"({"version": 1, "rules": [
      {"match": "^empty", "output": "!empty"},
      {"match": "^net", "output": "!fail:network"},
      {"match": "^auth", "output": "!fail:auth"},
      {"match": "^pick", "output": "{{pick:x|y|z}} {{images}} {{seed}}"}]})");
  auto transport = std::make_shared<MockChatTransport>(rules);
  std::vector<double> sleeps;
  ChatClient client(Role::kLlm, transport, std::nullopt, recording_policy(1, &sleeps));
  auto req = simple("pick one");
  req.seed = 4;
  const auto first = client.chat(req).text;
  CHECK(first == client.chat(req).text);
  CHECK(first.substr(1) == " 0 4");
  CHECK(std::string("xyz").find(first[0]) != std::string::npos);

  try {
    client.chat(simple("empty"));
    FAIL("expected failure");
  } catch (const BackendError& e) {
    CHECK(e.failure() == BackendFailure::kEmptyOutput);
    CHECK(e.attempts() == 2);
  }
  try {
    client.chat(simple("net"));
    FAIL("expected failure");
  } catch (const BackendError& e) {
    CHECK(e.failure() == BackendFailure::kNetwork);
    CHECK(e.attempts() == 2);
  }
  try {
    client.chat(simple("auth"));
    FAIL("expected failure");
  } catch (const BackendError& e) {
    CHECK(e.failure() == BackendFailure::kAuth);
    CHECK(e.attempts() == 1);
  }
  CHECK_THROWS(parse_mock_rules("{\"rules\": 3}"));
  CHECK(builtin_mock_rules().size() >= 8);
}

TEST_CASE("response cache serves identical requests") {
  TempDir dir;
  auto transport = std::make_shared<ScriptedTransport>(std::vector{ScriptedTransport::Step::kOk});
  ChatClient client(Role::kLlm, transport, ResponseCache(dir.path()), RetryPolicy{});
  const auto a = client.chat(simple("hello"));
  const auto b = client.chat(simple("hello"));
  CHECK_FALSE(a.cache_hit);
  CHECK(b.cache_hit);
  CHECK(a.text == b.text);
  CHECK(transport->calls() == 1);
  CHECK(client.uncached_calls() == 1);
  CHECK(client.total_calls() == 2);
  client.chat(simple("other"));
  CHECK(transport->calls() == 2);
  // A fresh client over the same directory starts warm.
  ChatClient again(Role::kLlm, transport, ResponseCache(dir.path()), RetryPolicy{});
  CHECK(again.chat(simple("hello")).cache_hit);
}

TEST_CASE("retries back off and report attempts") {
  using S = ScriptedTransport::Step;
  std::vector<double> sleeps;
  auto down = std::make_shared<ScriptedTransport>(std::vector{S::kNetwork});
  ChatClient client(Role::kLlm, down, std::nullopt, recording_policy(2, &sleeps));
  try {
    client.chat(simple("x"));
    FAIL("expected failure");
  } catch (const BackendError& e) {
    CHECK(e.attempts() == 3);
    CHECK(e.failure() == BackendFailure::kNetwork);
  }
  CHECK(down->calls() == 3);
  REQUIRE(sleeps.size() == 2);
  CHECK(sleeps[0] >= 0.8);
  CHECK(sleeps[0] <= 1.2);
  CHECK(sleeps[1] >= 1.6);
  CHECK(sleeps[1] <= 2.4);

  sleeps.clear();
  auto flaky = std::make_shared<ScriptedTransport>(std::vector{S::kNetwork, S::kOk});
  ChatClient ok(Role::kLlm, flaky, std::nullopt, recording_policy(2, &sleeps));
  const auto r = ok.chat(simple("x"));
  CHECK(r.attempts == 2);
  CHECK(sleeps.size() == 1);

  auto auth = std::make_shared<ScriptedTransport>(std::vector{S::kAuth});
  ChatClient denied(Role::kLlm, auth, std::nullopt, recording_policy(5, &sleeps));
  CHECK_THROWS_AS(denied.chat(simple("x")), BackendError);
  CHECK(auth->calls() == 1);

  auto empty_once = std::make_shared<ScriptedTransport>(std::vector{S::kEmpty, S::kOk});
  ChatClient recovers(Role::kLlm, empty_once, std::nullopt, recording_policy(0, &sleeps));
  CHECK(recovers.chat(simple("x")).attempts == 2);
}

TEST_CASE("request digests do not collide") {
  Rng rng(77);
  std::set<std::string> seen;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    ChatRequest r;
    r.user = std::to_string(i) + ":" + std::to_string(rng.engine()());
    seen.insert(request_digest(Role::kLlm, "m", r));
  }
  CHECK(seen.size() == static_cast<std::size_t>(n));
  ChatRequest r = simple("same");
  const auto base = request_digest(Role::kLlm, "m", r);
  CHECK(base != request_digest(Role::kImageLmm, "m", r));
  CHECK(base != request_digest(Role::kLlm, "m2", r));
  r.images.push_back({0.0, "image/png", "bytes"});
  CHECK(base != request_digest(Role::kLlm, "m", r));
}

TEST_CASE("semantic distance") {
  const std::vector<double> a = {0.6, 0.8}, neg = {-0.6, -0.8};
  CHECK(semantic_distance(a, a) == doctest::Approx(0.0));
  CHECK(semantic_distance(a, neg) == doctest::Approx(2.0));
  CHECK(semantic_distance(a, std::vector<double>{3.0, 4.0}) == doctest::Approx(0.0));
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    const auto x = rng.unit(9), y = rng.unit(9);
    double d = 0;
    for (int k = 0; k < 9; ++k) d += x[k] * y[k];
    CHECK(std::abs(semantic_distance(x, y) - (1.0 - d)) < 1e-9);
    CHECK(semantic_distance(x, y) == semantic_distance(y, x));
  }
  CHECK_THROWS_AS(semantic_distance(a, std::vector<double>{1, 2, 3}), InvalidArgument);
}

TEST_CASE("mock embedder contract") {
  MockEmbedder e(32, 5);
  const std::vector<std::string> texts = {"x", "a dog runs", "x"};
  const auto v = e.embed(texts);
  REQUIRE(v.size() == 3);
  for (const auto& x : v) CHECK(norm(x) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(v[0] == v[2]);
  CHECK(v[0] != v[1]);
  CHECK(e.calls() == 1);
  CHECK(e.texts_embedded() == 3);
  const std::vector<std::string> one = {"a dog runs"};
  CHECK(e.embed(one)[0] == v[1]);
  MockEmbedder other(32, 6);
  CHECK(other.embed(one)[0] != v[1]);
  const std::vector<std::string> blank = {"  "};
  CHECK_THROWS_AS(e.embed(blank), InvalidArgument);
}

TEST_CASE("attachments are validated per role") {
  auto transport = std::make_shared<ScriptedTransport>(std::vector{ScriptedTransport::Step::kOk});
  BackendSet set;
  set.llm = std::make_shared<ChatClient>(Role::kLlm, transport, std::nullopt, RetryPolicy{});
  set.image_lmm = std::make_shared<ChatClient>(Role::kImageLmm, transport, std::nullopt, RetryPolicy{});
  CHECK(set.chat(Role::kLlm, simple("x")).text == "echo: x");
  CHECK_THROWS_AS(set.chat(Role::kImageLmm, simple("x")), InvalidArgument);
  auto with_image = simple("x");
  with_image.images.push_back({0.0, "image/png", "png"});
  CHECK(set.chat(Role::kImageLmm, with_image).text == "echo: x");
  CHECK_THROWS_AS(set.chat(Role::kVideoLmm, with_image), InvalidArgument);
  set.video_lmm = set.image_lmm;
  CHECK_THROWS_AS(set.chat(Role::kVideoLmm, simple("x")), InvalidArgument);
}

TEST_CASE("frame embedders") {
  FrameRef red{0.0, {}, std::make_shared<Image>(Image::solid(8, 8, 255, 0, 0))};
  FrameRef blue{0.0, {}, std::make_shared<Image>(Image::solid(8, 8, 0, 0, 255))};
  MockFrameEmbedder m(16, 1);
  CHECK(m.embed_frame(red) == m.embed_frame(red));
  CHECK(m.embed_frame(red) != m.embed_frame(blue));
  CHECK(m.embed_frame(red).size() == 16);

  TempDir dir;
  finecap::testing::write_text(dir / "pre.jsonl",
                               R"({"frame": "v1/500", "vector": [1, 0, 0]})" "\n"
                               R"({"frame": "v1/1000", "vector": [0, 2, 0]})" "\n");
  PrecomputedFrameEmbedder pre(dir / "pre.jsonl");
  CHECK(pre.dim() == 3);
  FrameRef f{0.5, dir / "frames" / "v1" / "500.png", nullptr};
  CHECK(pre.embed_frame(f) == EmbeddingVector{1, 0, 0});
  FrameRef missing{0.75, dir / "frames" / "v1" / "750.png", nullptr};
  CHECK_THROWS(pre.embed_frame(missing));
}

namespace {

// Local OpenAI-style server on an ephemeral port.
class FakeServer {
 public:
  FakeServer() {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      {
        std::lock_guard<std::mutex> lock(mu_);
        last_body_ = req.body;
        last_auth_ = req.get_header_value("Authorization");
      }
      const auto body = nlohmann::json::parse(req.body);
      const std::string user = body["messages"].back()["content"].is_string()
                                   ? body["messages"].back()["content"].get<std::string>()
                                   : body["messages"].back()["content"][0]["text"].get<std::string>();
      if (user == "deny") {
        res.status = 401;
        return;
      }
      nlohmann::json out = {{"choices", {{{"message", {{"content", "reply to " + user}}}}}}};
      res.set_content(out.dump(), "application/json");
    });
    server_.Post("/v1/embeddings", [](const httplib::Request& req, httplib::Response& res) {
      const auto body = nlohmann::json::parse(req.body);
      nlohmann::json data = nlohmann::json::array();
      for (const auto& t : body["input"]) {
        const double len = static_cast<double>(t.get<std::string>().size());
        data.push_back({{"embedding", {len, 1.0, 0.0}}});
      }
      res.set_content(nlohmann::json({{"data", data}}).dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeServer() {
    server_.stop();
    thread_.join();
  }
  std::string url(const std::string& path) const {
    return "http://127.0.0.1:" + std::to_string(port_) + path;
  }
  std::string last_body() {
    std::lock_guard<std::mutex> lock(mu_);
    return last_body_;
  }
  std::string last_auth() {
    std::lock_guard<std::mutex> lock(mu_);
    return last_auth_;
  }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
  std::mutex mu_;
  std::string last_body_, last_auth_;
};

BackendConfig http_config(const std::string& endpoint) {
  BackendConfig c;
  c.endpoint = endpoint;
  c.model = "test-model";
  c.timeout_s = 5.0;
  c.max_retries = 0;
  return c;
}

}  // namespace

TEST_CASE("http chat round trip") {
  FakeServer server;
  auto cfg = http_config(server.url("/v1/chat/completions"));
  cfg.token_env = "FINECAP_TEST_TOKEN";
  ::setenv("FINECAP_TEST_TOKEN", "sekret", 1);
  auto transport = std::make_shared<HttpChatTransport>(cfg);
  ChatClient client(Role::kImageLmm, transport, std::nullopt, RetryPolicy{});
  auto req = simple("hi");
  req.images.push_back({1.5, "image/png", "PNGDATA"});
  CHECK(client.chat(req).text == "reply to hi");
  CHECK(server.last_auth() == "Bearer sekret");
  const auto body = nlohmann::json::parse(server.last_body());
  CHECK(body["model"] == "test-model");
  CHECK(body["temperature"] == 0.0);
  CHECK(body["messages"].back()["content"][1]["image_url"]["url"] ==
        "data:image/png;base64," + base64_encode("PNGDATA"));

  try {
    client.chat(simple("deny"));
    FAIL("expected failure");
  } catch (const BackendError& e) {
    CHECK(e.failure() == BackendFailure::kAuth);
    CHECK(e.attempts() == 1);
  }
  ::unsetenv("FINECAP_TEST_TOKEN");
}

TEST_CASE("http chat against an unreachable endpoint") {
  // Bind and release a port so nothing is listening on it.
  int port = 0;
  {
    httplib::Server probe;
    port = probe.bind_to_any_port("127.0.0.1");
  }
  auto cfg = http_config("http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions");
  cfg.timeout_s = 1.0;
  std::vector<double> sleeps;
  ChatClient client(Role::kLlm, std::make_shared<HttpChatTransport>(cfg), std::nullopt,
                    recording_policy(2, &sleeps));
  try {
    client.chat(simple("x"));
    FAIL("expected failure");
  } catch (const BackendError& e) {
    CHECK(e.attempts() == 3);
    CHECK(e.failure() == BackendFailure::kNetwork);
  }
  CHECK(sleeps.size() == 2);
}

TEST_CASE("http embedder") {
  FakeServer server;
  TempDir dir;
  auto cfg = http_config(server.url("/v1/embeddings"));
  cfg.cache_dir = dir.path();
  HttpEmbedder e(cfg, 3, RetryPolicy{});
  const std::vector<std::string> texts = {"ab", "abcd"};
  const auto v = e.embed(texts);
  REQUIRE(v.size() == 2);
  CHECK(v[0][0] == doctest::Approx(2.0 / std::sqrt(5.0)));
  CHECK(norm(v[1]) == doctest::Approx(1.0));
  HttpEmbedder wrong(http_config(server.url("/v1/embeddings")), 4, RetryPolicy{});
  CHECK_THROWS(wrong.embed(texts));
  CHECK(split_url("http://h:1/a/b") == std::pair<std::string, std::string>{"http://h:1", "/a/b"});
  CHECK_THROWS_AS(split_url("h:1/a"), InvalidArgument);
}

TEST_CASE("frame extraction through an external decoder") {
  TempDir dir;
  write_png(dir / "src.png", Image::solid(4, 4, 10, 20, 30));
  const auto script = dir / "fake-decoder.sh";
  finecap::testing::write_text(script,
                               "#!/bin/sh\n"
                               "for last; do :; done\n"
                               "d=$(dirname \"$last\")\n"
                               "cp '" + (dir / "src.png").string() + "' \"$d/000001.png\"\n"
                               "cp '" + (dir / "src.png").string() + "' \"$d/000002.png\"\n"
                               "cp '" + (dir / "src.png").string() + "' \"$d/000003.png\"\n");
  std::filesystem::permissions(script, std::filesystem::perms::owner_all);
  CHECK(extract_frames(script, dir / "video.mp4", dir / "frames", "vid", 4.0) == 3);
  CHECK(std::filesystem::exists(dir / "frames" / "vid" / "0.png"));
  CHECK(std::filesystem::exists(dir / "frames" / "vid" / "250.png"));
  CHECK(std::filesystem::exists(dir / "frames" / "vid" / "500.png"));
  DirectoryFrameProvider provider(dir / "frames");
  const auto seq = provider.frames_for({"vid", 0.0, 1.0, "q", Split::kTrain});
  CHECK(seq.frames.size() == 3);
  CHECK(seq.frames[1].timestamp == doctest::Approx(0.25));

  finecap::testing::write_text(dir / "fail.sh", "#!/bin/sh\nexit 3\n");
  std::filesystem::permissions(dir / "fail.sh", std::filesystem::perms::owner_all);
  CHECK_THROWS_AS(extract_frames(dir / "fail.sh", dir / "v.mp4", dir / "frames", "w", 1.0), IoError);
}
