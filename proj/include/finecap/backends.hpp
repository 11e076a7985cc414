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

#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <regex>
#include <span>
#include <unordered_map>
#include <string>
#include <string_view>
#include <vector>

#include "finecap/errors.hpp"
#include "finecap/frames.hpp"

namespace finecap {

// The three chat-style model roles of the pipeline. The sentence embedder is
// modeled separately by `Embedder`.
enum class Role { kLlm, kImageLmm, kVideoLmm };

std::string_view to_string(Role role);
std::optional<Role> parse_role(std::string_view s);

struct BackendConfig {
  std::string endpoint;
  std::string model;
  std::string token_env;  // name of the environment variable holding the token
  double timeout_s = 60.0;
  int max_retries = 3;
  std::filesystem::path cache_dir;  // empty disables the cache
  double temperature = 0.7;
  double backoff_initial_s = 1.0;
};

std::optional<std::string> check(const BackendConfig& cfg);

struct Attachment {
  double timestamp = 0.0;
  std::string media_type = "image/png";
  std::string data;  // encoded image bytes
};

struct ChatRequest {
  std::string system;
  std::string user;
  std::vector<Attachment> images;  // ordered; video frames in time order
  double temperature = 0.7;
  std::uint64_t seed = 0;
};

struct ChatResponse {
  std::string text;
  double latency_s = 0.0;
  bool cache_hit = false;
  int attempts = 0;
};

enum class BackendFailure { kNetwork, kAuth, kEmptyOutput, kProtocol };

class BackendError : public Error {
 public:
  BackendError(BackendFailure failure, const std::string& what, int attempts)
      : Error(ErrorCode::kBackend, what), failure_(failure), attempts_(attempts) {}
  BackendFailure failure() const noexcept { return failure_; }
  int attempts() const noexcept { return attempts_; }

 private:
  BackendFailure failure_;
  int attempts_;
};

// Raised by transports for a single failed attempt.
class TransportError : public std::runtime_error {
 public:
  enum class Kind { kRetryable, kAuth, kFatal };
  TransportError(Kind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

// One request/response exchange with a model; no caching or retries.
// Implementations must be safe for concurrent use.
class ChatTransport {
 public:
  virtual ~ChatTransport() = default;
  virtual std::string send(Role role, const ChatRequest& req) = 0;
  virtual std::string model_name() const = 0;
};

// Content-addressed response store: `<dir>/<k0k1>/<key>.json`.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir);
  std::optional<std::string> get(const std::string& key) const;
  void put(const std::string& key, std::string_view value) const;
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path path_for(const std::string& key) const;
  std::filesystem::path dir_;
};

// Exponential backoff: initial, doubling, jittered by +-jitter.
struct RetryPolicy {
  int max_retries = 3;
  double initial_delay_s = 1.0;
  double factor = 2.0;
  double jitter = 0.2;
  std::function<void(double)> sleep;  // defaults to a real sleep

  // Delay before retry number `retry` (0-based). `salt` makes jitter a
  // deterministic function of the request.
  double delay(int retry, std::uint64_t salt) const;
  void wait(int retry, std::uint64_t salt) const;
};

// SHA-256 over (role, model, full request payload incl. attachment bytes).
std::string request_digest(Role role, std::string_view model, const ChatRequest& req);

// Cache + retry wrapper around a transport for one role.
class ChatClient {
 public:
  ChatClient(Role role, std::shared_ptr<ChatTransport> transport,
             std::optional<ResponseCache> cache, RetryPolicy retry);

  ChatResponse chat(const ChatRequest& req);

  Role role() const { return role_; }
  std::string model_name() const { return transport_->model_name(); }
  // Calls that missed the cache.
  std::size_t uncached_calls() const { return uncached_calls_.load(); }
  std::size_t total_calls() const { return total_calls_.load(); }

 private:
  Role role_;
  std::shared_ptr<ChatTransport> transport_;
  std::optional<ResponseCache> cache_;
  RetryPolicy retry_;
  std::atomic<std::size_t> uncached_calls_{0};
  std::atomic<std::size_t> total_calls_{0};
};

// Mock transport driven by rules: the first rule whose role matches and whose
// regex matches the user prompt renders its template.
//
// Template placeholders: {{0}}..{{9}} capture groups, {{prompt}}, {{seed}},
// {{images}} (attachment count), {{pick:a|b|c}} (deterministic choice from the
// request digest). Whole-output directives: "!empty", "!fail:network",
// "!fail:auth".
struct MockRule {
  std::optional<Role> role;
  std::string pattern;
  std::string output;
};

std::vector<MockRule> parse_mock_rules(std::string_view json_text);
std::vector<MockRule> load_mock_rules(const std::filesystem::path& path);
// Rules shipped with the library covering every pipeline prompt.
std::vector<MockRule> builtin_mock_rules();

class MockChatTransport : public ChatTransport {
 public:
  explicit MockChatTransport(std::vector<MockRule> rules,
                             std::string model = "mock");
  std::string send(Role role, const ChatRequest& req) override;
  std::string model_name() const override { return model_; }
  std::size_t sends() const { return sends_.load(); }

 private:
  struct Compiled {
    MockRule rule;
    std::regex re;
  };
  std::vector<Compiled> rules_;
  std::string model_;
  std::atomic<std::size_t> sends_{0};
};

// OpenAI-style chat-completion endpoint.
class HttpChatTransport : public ChatTransport {
 public:
  explicit HttpChatTransport(BackendConfig cfg);
  std::string send(Role role, const ChatRequest& req) override;
  std::string model_name() const override { return cfg_.model; }

  // Request body for `req`; exposed for tests.
  std::string build_body(Role role, const ChatRequest& req) const;
  static std::string parse_response(std::string_view body);

 private:
  BackendConfig cfg_;
};

// Splits "http://host:port/path" into ("http://host:port", "/path").
std::pair<std::string, std::string> split_url(const std::string& url);

using EmbeddingVector = std::vector<double>;

double norm(std::span<const double> v);
double dot(std::span<const double> a, std::span<const double> b);
// Throws NumericError on a zero or non-finite vector.
EmbeddingVector normalized(EmbeddingVector v);

// 1 - cosine(a, b), in [0, 2].
double semantic_distance(std::span<const double> a, std::span<const double> b);

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::size_t dim() const = 0;

  // One unit-norm vector per text, order preserved.
  std::vector<EmbeddingVector> embed(std::span<const std::string> texts);

  std::size_t calls() const { return calls_.load(); }
  std::size_t texts_embedded() const { return texts_.load(); }

 protected:
  virtual std::vector<EmbeddingVector> embed_raw(std::span<const std::string> texts) = 0;

 private:
  std::atomic<std::size_t> calls_{0};
  std::atomic<std::size_t> texts_{0};
};

// Bag of hashed words: each lowercased token maps to a seeded Gaussian vector;
// a text is the normalized sum. Shared words bring texts closer together.
class MockEmbedder : public Embedder {
 public:
  MockEmbedder(std::size_t dim, std::uint64_t seed);
  std::size_t dim() const override { return dim_; }

 protected:
  std::vector<EmbeddingVector> embed_raw(std::span<const std::string> texts) override;

 private:
  std::size_t dim_;
  std::uint64_t seed_;
};

// OpenAI-style embeddings endpoint: {model, input:[...]} -> data[i].embedding.
class HttpEmbedder : public Embedder {
 public:
  HttpEmbedder(BackendConfig cfg, std::size_t dim, RetryPolicy retry);
  std::size_t dim() const override { return dim_; }

 protected:
  std::vector<EmbeddingVector> embed_raw(std::span<const std::string> texts) override;

 private:
  std::vector<EmbeddingVector> fetch(std::span<const std::string> texts);
  BackendConfig cfg_;
  std::size_t dim_;
  RetryPolicy retry_;
  std::optional<ResponseCache> cache_;
};

class FrameEmbedder {
 public:
  virtual ~FrameEmbedder() = default;
  virtual std::size_t dim() const = 0;
  virtual EmbeddingVector embed_frame(const FrameRef& frame) const = 0;
};

// Seeded random projection of a 4x4 grid of mean colors.
class MockFrameEmbedder : public FrameEmbedder {
 public:
  MockFrameEmbedder(std::size_t dim, std::uint64_t seed);
  std::size_t dim() const override { return dim_; }
  EmbeddingVector embed_frame(const FrameRef& frame) const override;

 private:
  std::size_t dim_;
  std::vector<double> projection_;  // dim x 48, row-major
};

// Looks frames up by "<video_id>/<timestamp_ms>" in a JSONL file of
// {"frame": key, "vector": [...]}.
class PrecomputedFrameEmbedder : public FrameEmbedder {
 public:
  explicit PrecomputedFrameEmbedder(const std::filesystem::path& path);
  std::size_t dim() const override { return dim_; }
  EmbeddingVector embed_frame(const FrameRef& frame) const override;

 private:
  std::size_t dim_ = 0;
  std::unordered_map<std::string, EmbeddingVector> vectors_;
};

// Deterministic standard normal stream (Box-Muller over splitmix64), identical
// on every platform.
class GaussianStream {
 public:
  explicit GaussianStream(std::uint64_t seed) : state_(seed) {}
  double next();

 private:
  std::uint64_t next_u64();
  double uniform();
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Handles for every model role used by the pipeline stages.
struct BackendSet {
  std::shared_ptr<ChatClient> llm;
  std::shared_ptr<ChatClient> image_lmm;
  std::shared_ptr<ChatClient> video_lmm;
  std::shared_ptr<Embedder> embedder;
  std::shared_ptr<FrameEmbedder> frame_embedder;

  // Validates role-specific attachments, then dispatches.
  ChatResponse chat(Role role, const ChatRequest& req) const;
};

}  // namespace finecap

namespace finecap::detail {

// Runs `attempt` under `policy`: transport failures back off and retry up to
// max_retries times; an empty result is retried once. Auth and fatal
// failures surface immediately. `attempts` receives the attempt count.
std::string send_with_retry(const RetryPolicy& policy, std::uint64_t salt,
                            const std::function<std::string()>& attempt,
                            int& attempts);

}  // namespace finecap::detail
