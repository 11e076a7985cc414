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

#include "finecap/backends.hpp"

#include <cmath>
#include <thread>

#include "finecap/digest.hpp"
#include "finecap/io.hpp"
#include "json.hpp"

namespace finecap {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(Role role) {
  switch (role) {
    case Role::kLlm: return "llm";
    case Role::kImageLmm: return "image_lmm";
    case Role::kVideoLmm: return "video_lmm";
  }
  return "llm";
}

std::optional<Role> parse_role(std::string_view s) {
  if (s == "llm") return Role::kLlm;
  if (s == "image_lmm") return Role::kImageLmm;
  if (s == "video_lmm") return Role::kVideoLmm;
  return std::nullopt;
}

std::optional<std::string> check(const BackendConfig& cfg) {
  if (cfg.max_retries < 0) return "max_retries >= 0";
  if (!(cfg.timeout_s > 0.0)) return "timeout > 0";
  if (!(cfg.backoff_initial_s >= 0.0)) return "backoff_initial_s >= 0";
  return std::nullopt;
}

ResponseCache::ResponseCache(fs::path dir) : dir_(std::move(dir)) {}

fs::path ResponseCache::path_for(const std::string& key) const {
  return dir_ / key.substr(0, 2) / (key + ".json");
}

std::optional<std::string> ResponseCache::get(const std::string& key) const {
  const fs::path p = path_for(key);
  std::error_code ec;
  if (!fs::exists(p, ec)) return std::nullopt;
  try {
    const json j = json::parse(read_file(p));
    if (j.value("key", "") != key) return std::nullopt;
    return j.at("value").get<std::string>();
  } catch (const std::exception&) {
    return std::nullopt;  // corrupt entry behaves as a miss
  }
}

void ResponseCache::put(const std::string& key, std::string_view value) const {
  json j = {{"key", key}, {"value", std::string(value)}};
  write_file_atomic(path_for(key), j.dump());
}

double RetryPolicy::delay(int retry, std::uint64_t salt) const {
  const double base = initial_delay_s * std::pow(factor, retry);
  const std::uint64_t h = sha256_u64(std::to_string(salt) + ":" + std::to_string(retry));
  const double u = static_cast<double>(h >> 11) * 0x1.0p-53;  // [0, 1)
  return base * (1.0 + jitter * (2.0 * u - 1.0));
}

void RetryPolicy::wait(int retry, std::uint64_t salt) const {
  const double d = delay(retry, salt);
  if (sleep) {
    sleep(d);
  } else if (d > 0.0) {
    std::this_thread::sleep_for(std::chrono::duration<double>(d));
  }
}

std::string request_digest(Role role, std::string_view model, const ChatRequest& req) {
  json images = json::array();
  for (const auto& a : req.images) {
    images.push_back({{"t", a.timestamp}, {"type", a.media_type}, {"sha256", sha256_hex(a.data)}});
  }
  const json payload = {{"role", std::string(to_string(role))},
                        {"model", std::string(model)},
                        {"system", req.system},
                        {"user", req.user},
                        {"images", images},
                        {"temperature", req.temperature},
                        {"seed", req.seed}};
  return sha256_hex(payload.dump());
}

namespace detail {

std::string send_with_retry(const RetryPolicy& policy, std::uint64_t salt,
                            const std::function<std::string()>& attempt,
                            int& attempts) {
  attempts = 0;
  int failures = 0;
  bool empty_retried = false;
  while (true) {
    ++attempts;
    std::string text;
    try {
      text = attempt();
    } catch (const TransportError& e) {
      if (e.kind() == TransportError::Kind::kAuth) {
        throw BackendError(BackendFailure::kAuth,
                           std::string("authentication failed: ") + e.what(), attempts);
      }
      if (e.kind() == TransportError::Kind::kFatal) {
        throw BackendError(BackendFailure::kProtocol, e.what(), attempts);
      }
      if (failures >= policy.max_retries) {
        throw BackendError(BackendFailure::kNetwork,
                           std::string(e.what()) + " (after " + std::to_string(attempts) +
                               " attempts)",
                           attempts);
      }
      policy.wait(failures, salt);
      ++failures;
      continue;
    }
    if (text.find_first_not_of(" \t\r\n") != std::string::npos) return text;
    if (empty_retried) {
      throw BackendError(BackendFailure::kEmptyOutput,
                         "empty model output (after " + std::to_string(attempts) + " attempts)",
                         attempts);
    }
    empty_retried = true;
  }
}

}  // namespace detail

ChatClient::ChatClient(Role role, std::shared_ptr<ChatTransport> transport,
                       std::optional<ResponseCache> cache, RetryPolicy retry)
    : role_(role),
      transport_(std::move(transport)),
      cache_(std::move(cache)),
      retry_(std::move(retry)) {}

ChatResponse ChatClient::chat(const ChatRequest& req) {
  ++total_calls_;
  const auto start = std::chrono::steady_clock::now();
  const std::string key = request_digest(role_, transport_->model_name(), req);
  ChatResponse resp;
  if (cache_) {
    if (auto hit = cache_->get(key)) {
      resp.text = std::move(*hit);
      resp.cache_hit = true;
      return resp;
    }
  }
  ++uncached_calls_;
  resp.text = detail::send_with_retry(
      retry_, sha256_u64(key), [&] { return transport_->send(role_, req); }, resp.attempts);
  if (cache_) cache_->put(key, resp.text);
  resp.latency_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return resp;
}

ChatResponse BackendSet::chat(Role role, const ChatRequest& req) const {
  ChatClient* client = nullptr;
  switch (role) {
    case Role::kLlm: client = llm.get(); break;
    case Role::kImageLmm:
      if (req.images.empty()) throw InvalidArgument("image_lmm request requires at least one image");
      client = image_lmm.get();
      break;
    case Role::kVideoLmm:
      if (req.images.empty()) throw InvalidArgument("video_lmm request requires a frame sequence");
      client = video_lmm.get();
      break;
  }
  if (client == nullptr) {
    throw InvalidArgument("no backend configured for role " + std::string(to_string(role)));
  }
  return client->chat(req);
}

}  // namespace finecap
